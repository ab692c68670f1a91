//! Adam optimizer over an ordered set of parameter tensors.

use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD};

/// Adam state. The tensor order passed to [`Adam::step`] must match the
/// order the state was created with.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, params: &[ArrayViewD<'_, f64>]) -> Self {
        let m = params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect();
        let v = params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect();
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m,
            v,
        }
    }

    pub fn step(&mut self, params: &mut [ArrayViewMutD<'_, f64>], grads: &[ArrayViewD<'_, f64>]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient count changed");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(p.shape(), g.shape(), "parameter/gradient shape mismatch");
            azip_update(
                p, g, m, v, self.lr, self.beta1, self.beta2, self.eps, bc1, bc2,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn azip_update(
    p: &mut ArrayViewMutD<'_, f64>,
    g: &ArrayViewD<'_, f64>,
    m: &mut ArrayD<f64>,
    v: &mut ArrayD<f64>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        });
}
