//! Full-reference quality metrics (MSE, PSNR, SSIM) and tabular reports.

use serde::{Deserialize, Serialize};

use crate::{Error, GrayImage, Result};

/// MSE floor used when evaluating PSNR, giving 120 dB for identical images
/// at `max_value = 1`.
pub const PSNR_MSE_FLOOR: f64 = 1e-12;

pub const REPORT_HEADER: &str = "model\tmse\tpsnr_db\tssim";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub max_value: f64,
    pub ssim_window: usize,
    pub k1: f64,
    pub k2: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            max_value: 1.0,
            ssim_window: 11,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_value > 0.0) {
            return Err(Error::invalid("metric max_value must be positive"));
        }
        if self.ssim_window < 3 || self.ssim_window.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "ssim window must be odd and at least 3, got {}",
                self.ssim_window
            )));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::invalid("ssim constants k1, k2 must be positive"));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.max_value).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.max_value).powi(2)
    }
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.same_dims(b, "mse")?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.pixels().len() as f64)
}

/// `20·log10(MAX / √mse)` with the MSE floored at [`PSNR_MSE_FLOOR`].
pub fn psnr_from_mse(mse: f64, max_value: f64) -> f64 {
    20.0 * (max_value / mse.max(PSNR_MSE_FLOOR).sqrt()).log10()
}

pub fn psnr(a: &GrayImage, b: &GrayImage, cfg: &MetricConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(psnr_from_mse(mse(a, b)?, cfg.max_value))
}

/// First and second moments over one SSIM window (population statistics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimWindowStats {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub sigma_xy: f64,
}

impl SsimWindowStats {
    /// Two-pass moments of the `size × size` window with top-left `(x0, y0)`.
    pub fn compute(a: &GrayImage, b: &GrayImage, x0: usize, y0: usize, size: usize) -> Self {
        let n = (size * size) as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        for y in y0..y0 + size {
            for x in x0..x0 + size {
                sx += a.get(x, y);
                sy += b.get(x, y);
            }
        }
        let (mu_x, mu_y) = (sx / n, sy / n);
        let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
        for y in y0..y0 + size {
            for x in x0..x0 + size {
                let dx = a.get(x, y) - mu_x;
                let dy = b.get(x, y) - mu_y;
                vx += dx * dx;
                vy += dy * dy;
                cxy += dx * dy;
            }
        }
        Self {
            mu_x,
            mu_y,
            sigma_x2: vx / n,
            sigma_y2: vy / n,
            sigma_xy: cxy / n,
        }
    }

    pub fn ssim(&self, c1: f64, c2: f64) -> f64 {
        let num = (2.0 * self.mu_x * self.mu_y + c1) * (2.0 * self.sigma_xy + c2);
        let den = (self.mu_x * self.mu_x + self.mu_y * self.mu_y + c1)
            * (self.sigma_x2 + self.sigma_y2 + c2);
        num / den
    }
}

/// Mean SSIM over every stride-1 placement of a uniform square window.
pub fn ssim(a: &GrayImage, b: &GrayImage, cfg: &MetricConfig) -> Result<f64> {
    cfg.validate()?;
    a.same_dims(b, "ssim")?;
    let k = cfg.ssim_window;
    let (w, h) = a.dims();
    if w < k || h < k {
        return Err(Error::invalid(format!(
            "ssim window {k} does not fit a {w}x{h} image"
        )));
    }
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let mut total = 0.0;
    for y0 in 0..=h - k {
        for x0 in 0..=w - k {
            total += SsimWindowStats::compute(a, b, x0, y0, k).ssim(c1, c2);
        }
    }
    Ok(total / ((w - k + 1) * (h - k + 1)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

pub fn pair_metrics(pred: &GrayImage, truth: &GrayImage, cfg: &MetricConfig) -> Result<PairMetrics> {
    let m = mse(pred, truth)?;
    Ok(PairMetrics {
        mse: m,
        psnr_db: psnr_from_mse(m, cfg.max_value),
        ssim: ssim(pred, truth, cfg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub mean_mse: f64,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
}

impl ReportRow {
    /// Arithmetic means of the per-pair values (PSNR is averaged per image,
    /// not recomputed from the mean MSE).
    pub fn from_pairs(model: impl Into<String>, pairs: &[PairMetrics]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("cannot aggregate zero pairs"));
        }
        let n = pairs.len() as f64;
        let (mut m, mut p, mut s) = (0.0, 0.0, 0.0);
        for pm in pairs {
            m += pm.mse;
            p += pm.psnr_db;
            s += pm.ssim;
        }
        Ok(Self {
            model: model.into(),
            mean_mse: m / n,
            mean_psnr_db: p / n,
            mean_ssim: s / n,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
    pub per_pair: Option<Vec<PairMetrics>>,
}

impl MetricsReport {
    pub fn push(&mut self, other: MetricsReport) {
        self.rows.extend(other.rows);
        match (&mut self.per_pair, other.per_pair) {
            (Some(mine), Some(theirs)) => mine.extend(theirs),
            (None, Some(theirs)) => self.per_pair = Some(theirs),
            _ => {}
        }
    }

    /// UTF-8 TSV: the fixed header, then one line per row at 6 decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\n",
                r.model, r.mean_mse, r.mean_psnr_db, r.mean_ssim
            ));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(REPORT_HEADER) => {}
            other => {
                return Err(Error::Parse {
                    field: "header",
                    message: format!("expected {REPORT_HEADER:?}, found {other:?}"),
                })
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let cols: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    field: "row",
                    message: format!("line {}: {e}", i + 2),
                })
            };
            if cols.len() != 4 {
                return Err(Error::Parse {
                    field: "row",
                    message: format!("line {}: expected 4 columns, found {}", i + 2, cols.len()),
                });
            }
            rows.push(ReportRow {
                model: cols[0].to_string(),
                mean_mse: num(cols[1])?,
                mean_psnr_db: num(cols[2])?,
                mean_ssim: num(cols[3])?,
            });
        }
        Ok(Self { rows, per_pair: None })
    }
}

/// Per-pair metrics in index order, then their means as a single-row report.
pub fn evaluate_pairs(
    pred: &[GrayImage],
    truth: &[GrayImage],
    cfg: &MetricConfig,
    model_name: &str,
) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "evaluate_pairs: {} predictions vs {} ground truths",
            pred.len(),
            truth.len()
        )));
    }
    let per_pair = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| pair_metrics(p, t, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        rows: vec![ReportRow::from_pairs(model_name, &per_pair)?],
        per_pair: Some(per_pair),
    })
}
