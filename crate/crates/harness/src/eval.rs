//! Test-split evaluation against the identity baseline.

use std::path::Path;

use fpforge_core::metrics::{pair_metrics, MetricsReport, PairMetrics, ReportRow};
use fpforge_core::pnm::write_pgm;
use fpforge_core::GrayImage;
use fpforge_neural::models::UNet;
use rayon::prelude::*;

use crate::checkpoint_io::{load_generator, ModelConfig};
use crate::config::EvalConfig;
use crate::dataset::{load_split, open_dataset, Pair};
use crate::error::{HarnessError, Result};
use crate::manifest::Split;
use crate::train::{from_tensor, to_tensor};

pub const REPORT_FILE: &str = "report.tsv";
pub const STRIPS_DIR: &str = "strips";
pub const IDENTITY_BASELINE: &str = "identity_baseline";

/// Per-sample results of one evaluation, in split order.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub model: Vec<PairMetrics>,
    pub baseline: Vec<PairMetrics>,
    /// `(id, [noisy | ground truth | output])` when strips were requested.
    pub strips: Vec<(String, GrayImage)>,
}

fn check_compatible(model: &ModelConfig, cfg: &EvalConfig) -> Result<()> {
    model.unet.check_input(cfg.input_size, cfg.input_size).map_err(|e| {
        HarnessError::config(format!(
            "checkpoint ({} of depth {}) cannot run at eval.input_size {}: {e}",
            model.model.as_str(),
            model.unet.depth,
            cfg.input_size
        ))
    })?;
    if model.unet.in_channels != 1 || model.unet.out_channels != 1 {
        return Err(HarnessError::config(format!(
            "checkpoint maps {} to {} channels; evaluation needs grayscale in and out",
            model.unet.in_channels, model.unet.out_channels
        )));
    }
    Ok(())
}

/// Runs `net` on center crops of `pairs` and scores model and baseline.
pub fn evaluate(net: &UNet<f32>, model_name: &str, pairs: &[Pair], cfg: &EvalConfig) -> Result<Evaluation> {
    cfg.metrics.validate()?;
    if pairs.is_empty() {
        return Err(HarnessError::config("test split is empty"));
    }
    let s = cfg.input_size;
    let per_pair = pairs
        .par_iter()
        .map(|p| {
            let noisy = p.noisy.center_crop(s, s).map_err(|e| {
                HarnessError::config(format!("pair {:?} at eval.input_size {s}: {e}", p.id))
            })?;
            let clean = p.clean.center_crop(s, s)?;
            let y = net.infer(&to_tensor(std::slice::from_ref(&noisy))?)?;
            let output = from_tensor(&y)?.remove(0);
            let m = pair_metrics(&output, &clean, &cfg.metrics)?;
            let b = pair_metrics(&noisy, &clean, &cfg.metrics)?;
            let strip = if cfg.strips {
                Some((p.id.clone(), GrayImage::hstack(&[&noisy, &clean, &output])?))
            } else {
                None
            };
            Ok((m, b, strip))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = Vec::with_capacity(per_pair.len());
    let mut baseline = Vec::with_capacity(per_pair.len());
    let mut strips = Vec::new();
    for (m, b, strip) in per_pair {
        model.push(m);
        baseline.push(b);
        strips.extend(strip);
    }
    let report = MetricsReport {
        rows: vec![
            ReportRow::from_pairs(model_name, &model)?,
            ReportRow::from_pairs(IDENTITY_BASELINE, &baseline)?,
        ],
        per_pair: None,
    };
    Ok(Evaluation {
        report,
        model,
        baseline,
        strips,
    })
}

/// Evaluates a checkpoint on the test split of `data`, writing
/// `report.tsv` and optional strips into `out`.
pub fn cmd_eval(data: &Path, checkpoint: &Path, out: &Path, cfg: &EvalConfig) -> Result<Evaluation> {
    let (model_cfg, net) = load_generator(checkpoint)?;
    check_compatible(&model_cfg, cfg)?;
    let manifest = open_dataset(data)?;
    let pairs = load_split(data, &manifest, Split::Test)?;
    let ev = evaluate(&net, model_cfg.model.as_str(), &pairs, cfg)?;
    std::fs::create_dir_all(out).map_err(HarnessError::io(out))?;
    let report = out.join(REPORT_FILE);
    std::fs::write(&report, ev.report.to_tsv()).map_err(HarnessError::io(&report))?;
    if cfg.strips {
        let dir = out.join(STRIPS_DIR);
        std::fs::create_dir_all(&dir).map_err(HarnessError::io(&dir))?;
        for (id, strip) in &ev.strips {
            let path = dir.join(format!("{id}_strip.pgm"));
            std::fs::write(&path, write_pgm(strip)).map_err(HarnessError::io(&path))?;
        }
    }
    Ok(ev)
}
