//! Compiles and runs a small C program against the generated header and
//! the static library, proving the ABI from the consumer side.

use std::path::PathBuf;
use std::process::Command;

use regrisk::bundle::save_model;
use regrisk::nn::encoder::{EncoderConfig, EncoderWeights};
use regrisk::nn::fusion::{FusionHead, FusionModel, ModelMode};
use regrisk::nn::mlp::{MlpConfig, MlpWeights};
use regrisk::similarity::RatioMode;
use regrisk::train::{FeatureStats, Hyperparams, Provenance};

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "regrisk.h"

int main(int argc, char **argv) {
    if (argc != 3) return 10;
    RegriskScorer *scorer = NULL;
    RegriskStatus st = regrisk_scorer_open(argv[1], argv[2], &scorer);
    if (st != REGRISK_STATUS_OK) {
        fprintf(stderr, "open: %s\n", regrisk_status_message(st));
        return 11;
    }
    char *json = NULL;
    st = regrisk_scorer_score_json(scorer, "example", &json);
    if (st != REGRISK_STATUS_OK) {
        fprintf(stderr, "score: %s\n", regrisk_status_message(st));
        return 12;
    }
    printf("%s\n", json);
    int ok = strstr(json, "\"matched_registrant\":\"ample\"") != NULL;
    regrisk_string_free(json);
    regrisk_scorer_free(scorer);

    double score = 0.0;
    st = regrisk_similarity("example", "ample", false, &score);
    if (st != REGRISK_STATUS_OK || score < 0.714285 || score > 0.714286) return 13;
    if (regrisk_format_version() == 0) return 14;
    return ok ? 0 : 15;
}
"#;

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn c_program_links_and_scores() {
    let root = workspace_root();
    // make sure the staticlib exists even when only the test target built
    let status = Command::new(env!("CARGO"))
        .args(["build", "-p", "regrisk-ffi"])
        .current_dir(&root)
        .status()
        .expect("cargo runs");
    assert!(status.success(), "building the staticlib failed");
    let staticlib = root.join("target/debug/libregrisk_ffi.a");
    assert!(staticlib.exists(), "staticlib missing at {staticlib:?}");

    let dir = tempfile::tempdir().unwrap();
    // fixture model + registrants
    let model = FusionModel {
        mode: ModelMode::Fused,
        mlp: Some(
            MlpWeights::init(MlpConfig {
                layer_widths: [8, 8, 8, 4],
                seed: 1,
                ..MlpConfig::default()
            })
            .unwrap(),
        ),
        encoder: Some(
            EncoderWeights::init(EncoderConfig {
                embed_dim: 8,
                ffn_dim: 16,
                max_len: 32,
                seed: 2,
                ..EncoderConfig::default()
            })
            .unwrap(),
        ),
        head: Some(FusionHead::init(8 + 4, 3)),
        feature_stats: FeatureStats::identity(),
        threshold: 0.5,
        similarity_mode: RatioMode::Paper,
        provenance: Provenance {
            seed: 0,
            hyperparams: Hyperparams::default(),
        },
    };
    let model_path = dir.path().join("model.rgrk");
    save_model(&model, &model_path).unwrap();
    let reg_path = dir.path().join("registrants.txt");
    std::fs::write(&reg_path, "ample\norange\n").unwrap();

    let c_path = dir.path().join("smoke.c");
    std::fs::write(&c_path, C_PROGRAM).unwrap();
    let bin_path = dir.path().join("smoke");
    let include_dir = root.join("crates/ffi/include");
    let out = Command::new("cc")
        .arg(&c_path)
        .arg("-I")
        .arg(&include_dir)
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin_path)
        .output()
        .expect("cc runs");
    assert!(
        out.status.success(),
        "C compile failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = Command::new(&bin_path)
        .arg(&model_path)
        .arg(&reg_path)
        .output()
        .expect("smoke binary runs");
    assert!(
        out.status.success(),
        "smoke binary exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("\"normalized_domain\":\"example\""));
}
