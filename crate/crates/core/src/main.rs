//! Command-line interface: dataset enrichment, model training and
//! evaluation, one-shot scoring, and the HTTP scoring service.
//!
//! Exit codes are a stable contract for registry automation:
//! 0 success, 1 usage error, 2 data error, 3 model error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use regrisk::bundle::{load_model, save_model};
use regrisk::error::{Error, Result};
use regrisk::nn::fusion::ModelMode;
use regrisk::service::{ScoreServer, Scorer, LISTEN_ENV};
use regrisk::similarity::{RatioMode, RegistrantIndex};
use regrisk::train::{
    self, evaluate, load_dataset, load_enriched, split_dataset, standardize, Hyperparams,
    SplitSpec, TrainSetup,
};

#[derive(Parser)]
#[command(
    name = "regrisk",
    about = "Registration-time domain risk scoring",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attach similarity and count features to a raw dataset CSV.
    Enrich {
        /// Input CSV with header `domain_name,label`.
        #[arg(long)]
        dataset: PathBuf,
        /// Registrant database: one domain per line, '#' comments.
        #[arg(long)]
        registrants: PathBuf,
        /// Similarity ratio mode.
        #[arg(long, default_value = "paper")]
        mode: RatioMode,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on an enriched CSV (70/15/15 split by seed).
    Train {
        /// Enriched CSV produced by `enrich`.
        #[arg(long)]
        enriched: PathBuf,
        /// Which branches to train.
        #[arg(long, default_value = "fused")]
        mode: ModelMode,
        /// Seed for the split, initialization, and batch shuffling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model bundle path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 5)]
        patience: usize,
        /// Decision threshold stored in the bundle.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Ratio mode the enrichment used (recorded for provenance and
        /// reused when the model scores live registrations).
        #[arg(long, default_value = "paper")]
        similarity_mode: RatioMode,
    },
    /// Evaluate a saved model on a partition of an enriched CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        enriched: PathBuf,
        /// Partition of the provenance-seeded split to score.
        #[arg(long, default_value = "test")]
        partition: String,
    },
    /// Score one domain and print the response record.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        registrants: PathBuf,
        #[arg(long)]
        domain: String,
    },
    /// Serve POST /score over HTTP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        registrants: PathBuf,
        /// Listen address, overridden by REGRISK_LISTEN when set.
        #[arg(long, default_value = "127.0.0.1:8375")]
        listen: String,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Enrich {
            dataset,
            registrants,
            mode,
            out,
        } => {
            let index = RegistrantIndex::from_file(&registrants)?;
            let (ds, report) = load_dataset(&dataset, &index)?;
            println!(
                "loaded {} rows ({} duplicates dropped, {} registrant collisions dropped)",
                report.kept, report.dropped_duplicates, report.dropped_in_registry
            );
            let enriched = train::enrich(ds, &index, mode);
            let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
            train::write_enriched(&enriched, &mut file)?;
            file.flush()?;
            println!(
                "enriched {} rows against {} registrants (mode {mode})",
                enriched.len(),
                index.len()
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Train {
            enriched,
            mode,
            seed,
            out,
            lr,
            batch_size,
            epochs,
            patience,
            threshold,
            similarity_mode,
        } => {
            let (ds, dropped) = load_enriched(&enriched)?;
            if dropped > 0 {
                println!("dropped {dropped} duplicate rows");
            }
            let (mut tr, mut va, mut te) = split_dataset(ds, &SplitSpec::with_seed(seed))?;
            standardize(&mut tr, &mut va, &mut te);
            println!(
                "split: train={} val={} test={}",
                tr.len(),
                va.len(),
                te.len()
            );
            let hp = Hyperparams {
                learning_rate: lr,
                batch_size,
                max_epochs: epochs,
                seed,
                early_stop_patience: patience,
                ..Hyperparams::default()
            };
            println!(
                "config: mode={mode} lr={lr} batch_size={batch_size} epochs={epochs} \
                 patience={patience} seed={seed} threshold={threshold} similarity_mode={similarity_mode}"
            );
            let setup = TrainSetup {
                similarity_mode,
                threshold,
                ..TrainSetup::default()
            };
            let (model, history) = train::train(mode, &tr, &va, &hp, &setup)?;
            for record in &history {
                println!("{record}");
            }
            let val_metrics = evaluate(&model, &va)?;
            let test_metrics = evaluate(&model, &te)?;
            print_metrics("val", &val_metrics);
            print_metrics("test", &test_metrics);
            save_model(&model, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Eval {
            model,
            enriched,
            partition,
        } => {
            let model = load_model(&model)?;
            let (ds, _) = load_enriched(&enriched)?;
            let (tr, va, te) = split_dataset(ds, &SplitSpec::with_seed(model.provenance.seed))?;
            let _ = tr;
            let part = match partition.as_str() {
                "val" => va,
                "test" => te,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown partition {other:?} (val|test)"
                    )))
                }
            };
            let metrics = evaluate(&model, &part)?;
            print_metrics(&partition, &metrics);
            Ok(())
        }
        Command::Score {
            model,
            registrants,
            domain,
        } => {
            let model = load_model(&model)?;
            let index = RegistrantIndex::from_file(&registrants)?;
            let scorer = Scorer::new(model, index);
            let response = scorer.score(&domain)?;
            println!(
                "{}",
                serde_json::to_string(&response).expect("response serializes")
            );
            Ok(())
        }
        Command::Serve {
            model,
            registrants,
            listen,
        } => {
            let model = load_model(&model)?;
            let index = RegistrantIndex::from_file(&registrants)?;
            let scorer = Scorer::new(model, index);
            let addr = std::env::var(LISTEN_ENV).unwrap_or(listen);
            let server = ScoreServer::bind(scorer, &addr)?;
            println!("listening on http://{}", server.local_addr());
            server.start(8).join();
            Ok(())
        }
    }
}

fn print_metrics(name: &str, m: &train::Metrics) {
    // Table-style column order: F1, Accuracy, Precision, Recall.
    println!(
        "{name}: F1={:.4} Acc={:.4} Prec={:.4} Rec={:.4}{}",
        m.f1,
        m.accuracy,
        m.precision,
        m.recall,
        if m.degenerate_precision || m.degenerate_recall {
            " (degenerate)"
        } else {
            ""
        }
    );
}
