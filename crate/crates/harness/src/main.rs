use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpforge::config::{ModelKind, RunConfig};
use fpforge::dataset::generate;
use fpforge::eval::cmd_eval;
use fpforge::train::cmd_train;
use fpforge::{HarnessError, Result};
use fpforge_core::metrics::{pair_metrics, MetricsReport, ReportRow};
use fpforge_core::pnm::load_image;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "fpforge", version, about = "Synthetic noisy fingerprints: generate, train, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config; keys override the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start from the full-size defaults instead of the desk-scale ones.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Render clean/noisy pairs and a manifest.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Directory of PGM/PPM background textures.
        #[arg(long)]
        textures: Option<PathBuf>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
    /// Train a model on the train split of a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Score a checkpoint on the test split against the identity baseline.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write [noisy | ground truth | output] strips.
        #[arg(long)]
        strips: bool,
    },
    /// MSE/PSNR/SSIM between two images or two directories of same-named images.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "pred")]
        name: String,
        /// Write the TSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Defaults, then the config file, then command-line flags.
fn resolve(common: &Common, patch: Value) -> Result<RunConfig> {
    let user = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        }
        None => Value::Object(Default::default()),
    };
    let model = common
        .model
        .or_else(|| user.pointer("/train/model").and_then(|v| serde_json::from_value(v.clone()).ok()))
        .unwrap_or(ModelKind::Unet);
    let defaults = if common.paper_scale {
        RunConfig::paper_scale(0, model)
    } else {
        let mut c = RunConfig::desk(0);
        c.train = fpforge::config::TrainConfig::desk(model);
        c
    };
    let mut value = serde_json::to_value(defaults).expect("config serializes");
    if let Value::Object(m) = &mut value {
        m.remove("seed");
    }
    merge(&mut value, user);
    merge(&mut value, patch);
    if let Some(seed) = common.seed {
        merge(&mut value, serde_json::json!({ "seed": seed }));
    }
    if let Some(m) = common.model {
        merge(&mut value, serde_json::json!({ "train": { "model": m } }));
    }
    if value.get("seed").is_none() {
        return Err(HarnessError::Config("a seed is required (--seed or \"seed\" in --config)".into()));
    }
    serde_json::from_value(value).map_err(|e| HarnessError::Config(e.to_string()))
}

fn read_image(path: &Path) -> Result<fpforge_core::GrayImage> {
    let bytes = std::fs::read(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_image(&bytes).map_err(|source| HarnessError::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn metrics(pred: &Path, truth: &Path, name: &str) -> Result<MetricsReport> {
    let pairs: Vec<(PathBuf, PathBuf)> = if pred.is_dir() {
        let mut names: Vec<_> = std::fs::read_dir(pred)
            .map_err(|source| HarnessError::Io {
                path: pred.to_path_buf(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .collect();
        names.sort();
        names.into_iter().map(|n| (pred.join(&n), truth.join(&n))).collect()
    } else {
        vec![(pred.to_path_buf(), truth.to_path_buf())]
    };
    let cfg = Default::default();
    let per_pair = pairs
        .iter()
        .map(|(p, t)| Ok(pair_metrics(&read_image(p)?, &read_image(t)?, &cfg)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        rows: vec![ReportRow::from_pairs(name, &per_pair)?],
        per_pair: Some(per_pair),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            common,
            count,
            out,
            textures,
            width,
            height,
        } => {
            let mut g = serde_json::Map::new();
            if let Some(c) = count {
                g.insert("count".into(), c.into());
            }
            if let Some(t) = textures {
                g.insert("textures".into(), t.to_string_lossy().into_owned().into());
            }
            if let Some(w) = width {
                g.insert("width".into(), w.into());
            }
            if let Some(h) = height {
                g.insert("height".into(), h.into());
            }
            let cfg = resolve(&common, serde_json::json!({ "generate": g }))?;
            let m = generate(&cfg.generate, cfg.seed, &out)?;
            let c = m.counts();
            println!("{} pairs ({} train / {} val / {} test) in {}", m.records.len(), c.train, c.val, c.test, out.display());
        }
        Command::Train {
            common,
            data,
            out,
            steps,
        } => {
            let patch = match steps {
                Some(s) => serde_json::json!({ "train": { "steps": s } }),
                None => serde_json::json!({}),
            };
            let cfg = resolve(&common, patch)?;
            let outcome = cmd_train(&data, &out, &cfg.train, cfg.seed)?;
            let s = &outcome.summary;
            for (i, term) in s.loss_terms.iter().enumerate() {
                println!("{term}: {:.6} -> {:.6}", s.initial_monitor[i], s.final_monitor[i]);
            }
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            out,
            strips,
        } => {
            let patch = serde_json::json!({ "eval": { "strips": strips } });
            let cfg = resolve(&common, patch)?;
            let ev = cmd_eval(&data, &checkpoint, &out, &cfg.eval)?;
            print!("{}", ev.report.to_tsv());
        }
        Command::Metrics { pred, truth, name, out } => {
            let tsv = metrics(&pred, &truth, &name)?.to_tsv();
            match out {
                Some(path) => std::fs::write(&path, tsv).map_err(|source| HarnessError::Io { path, source })?,
                None => print!("{tsv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
