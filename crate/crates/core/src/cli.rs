//! Command-line surface: corpus generation, featurization, splitting,
//! training, evaluation, inference, and the gradient-check harness.
//!
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
//! `SINV_THREADS` sets the worker count for featurization (default 1; the
//! output bytes are identical for any thread count).

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

use crate::data::{self, Split};
use crate::dsp::FeatureKind;
use crate::error::{Result, SiError};
use crate::eval;
use crate::nn;
use crate::synth;
use crate::train;

#[derive(Parser)]
#[command(name = "sinv", version, about = "acoustic-to-articulatory speech inversion toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic source-filter corpus.
    SynthData {
        /// Generator TOML config; defaults apply for missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract input features for every utterance of a corpus.
    Featurize {
        /// audspec, mspec, or mfcc.
        #[arg(long)]
        kind: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the speaker-independent split manifest with train-split stats.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        seed: u64,
        /// train,dev,test fractions, e.g. 0.8,0.1,0.1.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        ratios: String,
        /// Output path (default: <corpus>/manifest.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the TCN regressor.
    Train {
        /// Training TOML config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint: per-variable PPMC report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Baseline report CSV for the ablation delta column.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Report path prefix; writes <prefix>.txt and <prefix>.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Average per-utterance scores instead of pooling frames.
        #[arg(long)]
        per_utterance: bool,
    },
    /// Invert a WAV file into trajectories.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Ground-truth targets (binary feature file) for plot overlays.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Verify analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 220)]
        samples: usize,
        #[arg(long, default_value_t = 13)]
        seed: u64,
    },
}

fn threads_from_env() -> usize {
    std::env::var("SINV_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(1)
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(SiError::Config(format!("ratios must be three comma-separated numbers: '{s}'")));
    }
    let parse = |p: &str| -> Result<f64> {
        p.trim().parse().map_err(|_| SiError::Config(format!("bad ratio '{p}'")))
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

fn manifest_root(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData { config, out } => {
            let cfg: synth::SynthConfig = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    toml::from_str(&text)
                        .map_err(|e| SiError::Config(format!("{}: {e}", path.display())))?
                }
                None => synth::SynthConfig::default(),
            };
            let manifest = synth::generate_corpus(&cfg, &out)?;
            println!(
                "generated {} utterances from {} speakers under {}",
                manifest.utterances.len(),
                cfg.n_speakers,
                out.display()
            );
            Ok(())
        }
        Command::Featurize { kind, input, out } => {
            let kind: FeatureKind = kind.parse()?;
            if kind == FeatureKind::Targets {
                return Err(SiError::Config("featurize kind must be an input kind".into()));
            }
            let corpus = synth::read_corpus_manifest(&input.join("corpus.txt"))?;
            let threads = threads_from_env();
            data::featurize_corpus(&corpus.utterances, &input, &out, kind, threads)?;
            println!(
                "featurized {} utterances ({}) into {}",
                corpus.utterances.len(),
                kind.name(),
                out.join("feats").display()
            );
            Ok(())
        }
        Command::Split { corpus, seed, ratios, out } => {
            let ratios = parse_ratios(&ratios)?;
            let corpus_manifest = synth::read_corpus_manifest(&corpus.join("corpus.txt"))?;
            let manifest = data::make_splits(&corpus_manifest, &corpus, ratios, seed)?;
            let out = out.unwrap_or_else(|| corpus.join("manifest.txt"));
            data::write_split_manifest(&out, &manifest)?;
            let count = |s: Split| manifest.utterances_in(s).len();
            println!(
                "split {} utterances into train {} / dev {} / test {} ({}):",
                manifest.utterances.len(),
                count(Split::Train),
                count(Split::Dev),
                count(Split::Test),
                out.display()
            );
            for (speaker, split) in &manifest.assignment {
                println!("  {speaker}: {split:?}");
            }
            Ok(())
        }
        Command::Train { config, manifest, out } => {
            let config = train::read_train_config(&config)?;
            let split_manifest = data::read_split_manifest(&manifest)?;
            let root = manifest_root(&manifest);
            let outcome = train::train(&config, &split_manifest, &root, &out)?;
            let log_path = out.with_extension("log");
            std::fs::write(&log_path, outcome.log.join("\n") + "\n")?;
            println!(
                "trained {} epochs; best val MSE {} at epoch {}; checkpoint {}; log {}",
                outcome.epochs_run,
                outcome.best_val_mse,
                outcome.best_epoch,
                out.display(),
                log_path.display()
            );
            Ok(())
        }
        Command::Eval { ckpt, manifest, split, compare, out, per_utterance } => {
            let (mut model, _stats, _) = nn::load_checkpoint(&ckpt)?;
            let split: Split = split.parse()?;
            let split_manifest = data::read_split_manifest(&manifest)?;
            let root = manifest_root(&manifest);
            let kind = crate::infer::kind_for_channels(model.config.in_channels)?;
            let tv_only = model.config.n_targets
                == data::select_channels(&split_manifest.channels, true).len();
            let model_name = ckpt.file_stem().map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into());
            let mut report = eval::evaluate(
                &mut model,
                &model_name,
                &split_manifest,
                &root,
                kind,
                split,
                tv_only,
                per_utterance,
            )?;
            if let Some(baseline) = compare {
                let (_, base_avg_tvs, _) = eval::read_report_csv(&baseline)?;
                let base_name = baseline.file_stem().map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "baseline".into());
                report = report.with_comparison(&base_name, base_avg_tvs);
            }
            print!("{}", report.to_text());
            if let Some(prefix) = out {
                let txt = prefix.with_extension("txt");
                let csv = prefix.with_extension("csv");
                std::fs::write(&txt, report.to_text())?;
                std::fs::write(&csv, report.to_csv())?;
                println!("wrote {} and {}", txt.display(), csv.display());
            }
            Ok(())
        }
        Command::Infer { ckpt, wav, svg, csv, truth } => {
            let (mut model, stats, _) = nn::load_checkpoint(&ckpt)?;
            let wave = crate::io::read_wav(&wav)?;
            let traj = crate::infer::infer(&mut model, &stats, &wave)?;
            println!(
                "inverted {:.2} s of audio into {} frames x {} variables",
                wave.duration_seconds(),
                traj.len(),
                traj.names.len()
            );
            if let Some(path) = csv {
                crate::infer::write_trajectory_csv(&path, &traj)?;
                println!("wrote {}", path.display());
            }
            if let Some(path) = svg {
                let truth_traj = match truth {
                    Some(tpath) => {
                        let fm = crate::io::read_feature_matrix(&tpath)?;
                        let names = crate::io::read_channel_names(&tpath)
                            .unwrap_or_else(|_| traj.names.clone());
                        Some(crate::tv::TrajectorySet {
                            tracks: (0..fm.channels).map(|c| fm.channel(c)).collect(),
                            names,
                            frame_rate: fm.frame_rate,
                            valid_frames: fm.frames,
                        })
                    }
                    None => None,
                };
                crate::infer::write_trajectory_svg(&path, &traj, truth_traj.as_ref())?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Gradcheck { samples, seed } => {
            use rand::{Rng, SeedableRng};
            let config = nn::TcnConfig { in_channels: 8, n_targets: 6, width: 8, seed: 21 };
            let mut model = nn::build_tcn::<f64>(&config)?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
            let input = nn::Tensor::from_vec(
                &[2, 8, 25],
                (0..2 * 8 * 25).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let target = nn::Tensor::from_vec(
                &[2, 6, 20],
                (0..2 * 6 * 20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let mut mask = vec![true; 40];
            for m in mask.iter_mut().skip(35) {
                *m = false;
            }
            let report = nn::grad_check(&mut model, &input, &target, &mask, samples, 1e-5, seed)?;
            println!(
                "gradcheck: {} coordinates, max relative error {:.3e} (worst: param {} elem {} analytic {:.6e} numeric {:.6e})",
                report.checked,
                report.max_rel_error,
                report.worst.0,
                report.worst.1,
                report.worst.2,
                report.worst.3
            );
            if report.max_rel_error < 1e-4 {
                println!("gradcheck PASS (threshold 1e-4)");
                Ok(())
            } else {
                Err(SiError::Numeric(format!(
                    "gradcheck failed: max relative error {} >= 1e-4",
                    report.max_rel_error
                )))
            }
        }
    }
}
