//! Training loops for the three model kinds.

use std::path::Path;

use fpforge_core::rng::{mix64, rng_from_seed, SeededRng};
use fpforge_core::GrayImage;
use fpforge_neural::adam::AdamState;
use fpforge_neural::init::{init_weights_gaussian, init_weights_he, INIT_STD};
use fpforge_neural::loss::bce_loss;
use fpforge_neural::models::{PatchDiscriminator, UNet};
use fpforge_neural::schedule::lr_schedule;
use fpforge_neural::{Graph, ParamSet, Tensor, Var};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint_io::{save_model, ModelConfig, GENERATOR};
use crate::config::{InitScheme, ModelKind, TrainConfig};
use crate::dataset::{load_split, open_dataset, Pair};
use crate::error::{HarnessError, Result};
use crate::manifest::Split;

pub const HISTORY_FILE: &str = "history.tsv";
pub const SUMMARY_FILE: &str = "train_summary.json";
pub const CHECKPOINT_FILE: &str = "model.fpfn";
/// Training pairs scored (center-cropped) before and after training.
pub const MONITOR_PAIRS: usize = 64;

const INIT_STREAM: u64 = 0x696e_6974;
const BATCH_STREAM: u64 = 0x6261_7463;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub model: ModelKind,
    pub steps: usize,
    pub train_pairs: usize,
    pub monitor_pairs: usize,
    pub loss_terms: Vec<String>,
    pub initial_monitor: Vec<f64>,
    pub final_monitor: Vec<f64>,
}

/// Row 0 holds the monitor losses before any update; row `s ≥ 1` holds the
/// minibatch losses computed during step `s` and the learning rate it used.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub terms: Vec<&'static str>,
    pub rows: Vec<(usize, f64, Vec<f64>)>,
}

impl History {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("step\tlr\t{}\n", self.terms.join("\t"));
        for (step, lr, values) in &self.rows {
            out.push_str(&format!("{step}\t{lr}"));
            for v in values {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Networks being trained, in checkpoint order.
pub enum Trained {
    Unet(UNet<f32>),
    Pix2pix {
        generator: UNet<f32>,
        discriminator: PatchDiscriminator<f32>,
    },
    Cycle {
        g_xy: UNet<f32>,
        g_yx: UNet<f32>,
        d_x: PatchDiscriminator<f32>,
        d_y: PatchDiscriminator<f32>,
    },
}

impl Trained {
    pub fn generator(&self) -> &UNet<f32> {
        match self {
            Self::Unet(g) | Self::Pix2pix { generator: g, .. } | Self::Cycle { g_xy: g, .. } => g,
        }
    }

    pub fn named_params(&self) -> Vec<(&'static str, &ParamSet<f32>)> {
        match self {
            Self::Unet(g) => vec![(GENERATOR, &g.params)],
            Self::Pix2pix {
                generator,
                discriminator,
            } => vec![(GENERATOR, &generator.params), ("discriminator", &discriminator.params)],
            Self::Cycle { g_xy, g_yx, d_x, d_y } => vec![
                (GENERATOR, &g_xy.params),
                ("inverse_generator", &g_yx.params),
                ("discriminator_x", &d_x.params),
                ("discriminator_y", &d_y.params),
            ],
        }
    }
}

pub struct TrainOutcome {
    pub model: Trained,
    pub model_config: ModelConfig,
    pub history: History,
    pub summary: TrainSummary,
}

fn init<R: Rng>(p: &mut ParamSet<f32>, scheme: InitScheme, rng: &mut R) {
    match scheme {
        InitScheme::Gaussian => init_weights_gaussian(p, rng, INIT_STD),
        InitScheme::He => init_weights_he(p, rng, 1.0),
    }
}

/// Stacks single-channel images into a `[n, 1, h, w]` tensor.
pub fn to_tensor(images: &[GrayImage]) -> Result<Tensor<f32>> {
    let (w, h) = images.first().map(GrayImage::dims).unwrap_or((0, 0));
    let mut data = Vec::with_capacity(images.len() * w * h);
    for img in images {
        if img.dims() != (w, h) {
            return Err(HarnessError::config("batch images differ in size"));
        }
        data.extend(img.pixels().iter().map(|&v| v as f32));
    }
    Ok(Tensor::new([images.len(), 1, h, w], data)?)
}

/// Splits a `[n, 1, h, w]` tensor into clamped images.
pub fn from_tensor(t: &Tensor<f32>) -> Result<Vec<GrayImage>> {
    let [n, c, h, w] = t.shape();
    if c != 1 {
        return Err(HarnessError::config(format!("expected one channel, got {c}")));
    }
    (0..n)
        .map(|b| {
            let px = t.sample(b).iter().map(|&v| f64::from(v)).collect();
            Ok(GrayImage::from_clamped(w, h, px)?)
        })
        .collect()
}

/// Draws batches from per-epoch shuffles, always full, wrapping into the
/// next epoch when one runs out.
struct Batcher {
    n: usize,
    order: Vec<usize>,
    pos: usize,
    rng: SeededRng,
}

impl Batcher {
    fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            order: Vec::new(),
            pos: 0,
            rng: rng_from_seed(seed),
        }
    }

    fn next(&mut self, size: usize) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order = (0..self.n).collect();
                    self.order.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

fn random_crops(pairs: &[&Pair], size: usize, rng: &mut SeededRng) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let mut noisy = Vec::with_capacity(pairs.len());
    let mut clean = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (w, h) = p.noisy.dims();
        let x0 = rng.random_range(0..=w - size);
        let y0 = rng.random_range(0..=h - size);
        noisy.push(p.noisy.crop(x0, y0, size, size)?);
        clean.push(p.clean.crop(x0, y0, size, size)?);
    }
    Ok((to_tensor(&noisy)?, to_tensor(&clean)?))
}

fn center_crops(pairs: &[Pair], size: usize) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let mut noisy = Vec::with_capacity(pairs.len());
    let mut clean = Vec::with_capacity(pairs.len());
    for p in pairs {
        noisy.push(p.noisy.center_crop(size, size)?);
        clean.push(p.clean.center_crop(size, size)?);
    }
    Ok((to_tensor(&noisy)?, to_tensor(&clean)?))
}

fn item(g: &Graph<f32>, v: Var) -> f64 {
    f64::from(g.value(v).item())
}

fn prob(g: &mut Graph<f32>, d: &PatchDiscriminator<f32>, p: &[Var], x: Var) -> Result<Var> {
    let s = d.forward(g, p, x)?;
    Ok(g.sigmoid(s))
}

fn adam(p: &ParamSet<f32>, cfg: &TrainConfig) -> Result<AdamState<f32>> {
    Ok(AdamState::new(p, cfg.lr, cfg.beta1, cfg.beta2)?)
}

enum Optimizers {
    Unet(AdamState<f32>),
    Pix2pix {
        g: AdamState<f32>,
        d: AdamState<f32>,
    },
    Cycle {
        g_xy: AdamState<f32>,
        g_yx: AdamState<f32>,
        d_x: AdamState<f32>,
        d_y: AdamState<f32>,
    },
}

impl Optimizers {
    fn set_lr(&mut self, lr: f64) {
        match self {
            Self::Unet(a) => a.lr = lr,
            Self::Pix2pix { g, d } => {
                g.lr = lr;
                d.lr = lr;
            }
            Self::Cycle { g_xy, g_yx, d_x, d_y } => {
                for a in [g_xy, g_yx, d_x, d_y] {
                    a.lr = lr;
                }
            }
        }
    }
}

pub fn loss_terms(model: ModelKind) -> Vec<&'static str> {
    match model {
        ModelKind::Unet => vec!["bce"],
        ModelKind::Pix2pixSmoke => vec!["d_loss", "g_adv", "g_l1"],
        ModelKind::CycleganSmoke => vec!["d_loss", "g_adv", "cycle"],
    }
}

/// U-Net objective; updates when `opt` is given.
fn unet_pass(net: &mut UNet<f32>, opt: Option<&mut AdamState<f32>>, x: Tensor<f32>, t: Tensor<f32>) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let p = if opt.is_some() { g.params(&net.params) } else { g.frozen(&net.params) };
    let xv = g.input(x);
    let tv = g.input(t);
    let y = net.forward(&mut g, &p, xv)?;
    let loss = g.bce(y, tv)?;
    let value = item(&g, loss);
    if let Some(opt) = opt {
        g.backward(loss)?;
        opt.step(&mut net.params, &g.grads(&p))?;
    }
    Ok(vec![value])
}

fn generator_adversarial(g: &mut Graph<f32>, p_fake: Var, non_saturating: bool) -> Result<Var> {
    if non_saturating {
        let l = g.mean_log(p_fake)?;
        Ok(g.scale(l, -1.0))
    } else {
        Ok(g.mean_log1m(p_fake)?)
    }
}

struct Pix2pixNets<'a> {
    gen: &'a mut UNet<f32>,
    disc: &'a mut PatchDiscriminator<f32>,
}

/// Discriminator step then generator step of the conditional GAN. The
/// discriminator sees `(noisy, candidate)` channel pairs.
fn pix2pix_pass(
    nets: Pix2pixNets,
    mut opt: Option<(&mut AdamState<f32>, &mut AdamState<f32>)>,
    x: Tensor<f32>,
    t: Tensor<f32>,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let Pix2pixNets { gen, disc } = nets;
    let fake = gen.infer(&x)?;
    let d_loss = {
        let mut g = Graph::new();
        let dp = if opt.is_some() { g.params(&disc.params) } else { g.frozen(&disc.params) };
        let xv = g.input(x.clone());
        let tv = g.input(t.clone());
        let fv = g.input(fake);
        let real_in = g.concat(xv, tv)?;
        let fake_in = g.concat(xv, fv)?;
        let pr = prob(&mut g, disc, &dp, real_in)?;
        let pf = prob(&mut g, disc, &dp, fake_in)?;
        let lr = g.mean_log(pr)?;
        let lf = g.mean_log1m(pf)?;
        let v = g.add(lr, lf)?;
        let loss = g.scale(v, -1.0);
        let value = item(&g, loss);
        if let Some((_, d_opt)) = opt.as_mut() {
            g.backward(loss)?;
            d_opt.step(&mut disc.params, &g.grads(&dp))?;
        }
        value
    };
    let mut g = Graph::new();
    let gp = if opt.is_some() { g.params(&gen.params) } else { g.frozen(&gen.params) };
    let dp = g.frozen(&disc.params);
    let xv = g.input(x);
    let tv = g.input(t);
    let fake = gen.forward(&mut g, &gp, xv)?;
    let fake_in = g.concat(xv, fake)?;
    let pf = prob(&mut g, disc, &dp, fake_in)?;
    let adv = generator_adversarial(&mut g, pf, cfg.non_saturating)?;
    let l1 = g.l1(fake, tv)?;
    let weighted = g.scale(l1, cfg.l1_weight);
    let loss = g.add(adv, weighted)?;
    let terms = vec![d_loss, item(&g, adv), item(&g, l1)];
    if let Some((g_opt, _)) = opt {
        g.backward(loss)?;
        g_opt.step(&mut gen.params, &g.grads(&gp))?;
    }
    Ok(terms)
}

struct CycleNets<'a> {
    g_xy: &'a mut UNet<f32>,
    g_yx: &'a mut UNet<f32>,
    d_x: &'a mut PatchDiscriminator<f32>,
    d_y: &'a mut PatchDiscriminator<f32>,
}

type CycleOpts<'a> = (
    &'a mut AdamState<f32>,
    &'a mut AdamState<f32>,
    &'a mut AdamState<f32>,
    &'a mut AdamState<f32>,
);

/// Unpaired translation between noisy (X) and clean (Y) images with two
/// generators, two discriminators and an L1 cycle term.
fn cycle_pass(
    nets: CycleNets,
    opt: Option<CycleOpts>,
    x: Tensor<f32>,
    y: Tensor<f32>,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let CycleNets { g_xy, g_yx, d_x, d_y } = nets;
    let train = opt.is_some();
    let (mut og_xy, mut og_yx, mut od_x, mut od_y) = match opt {
        Some((a, b, c, d)) => (Some(a), Some(b), Some(c), Some(d)),
        None => (None, None, None, None),
    };
    let fake_y = g_xy.infer(&x)?;
    let fake_x = g_yx.infer(&y)?;
    let d_loss = {
        let mut g = Graph::new();
        let (px, py) = if train {
            (g.params(&d_x.params), g.params(&d_y.params))
        } else {
            (g.frozen(&d_x.params), g.frozen(&d_y.params))
        };
        let xv = g.input(x.clone());
        let yv = g.input(y.clone());
        let fxv = g.input(fake_x);
        let fyv = g.input(fake_y);
        let value = |g: &mut Graph<f32>, d: &PatchDiscriminator<f32>, p: &[Var], real: Var, fake: Var| -> Result<Var> {
            let pr = prob(g, d, p, real)?;
            let pf = prob(g, d, p, fake)?;
            let a = g.mean_log(pr)?;
            let b = g.mean_log1m(pf)?;
            Ok(g.add(a, b)?)
        };
        let vx = value(&mut g, d_x, &px, xv, fxv)?;
        let vy = value(&mut g, d_y, &py, yv, fyv)?;
        let v = g.add(vx, vy)?;
        let loss = g.scale(v, -1.0);
        let out = item(&g, loss);
        if train {
            g.backward(loss)?;
            let grads_x = g.grads(&px);
            let grads_y = g.grads(&py);
            od_x.as_mut().expect("train").step(&mut d_x.params, &grads_x)?;
            od_y.as_mut().expect("train").step(&mut d_y.params, &grads_y)?;
        }
        out
    };

    let mut g = Graph::new();
    let (pxy, pyx) = if train {
        (g.params(&g_xy.params), g.params(&g_yx.params))
    } else {
        (g.frozen(&g_xy.params), g.frozen(&g_yx.params))
    };
    let dpx = g.frozen(&d_x.params);
    let dpy = g.frozen(&d_y.params);
    let xv = g.input(x);
    let yv = g.input(y);
    let fy = g_xy.forward(&mut g, &pxy, xv)?;
    let fx = g_yx.forward(&mut g, &pyx, yv)?;
    let pfy = prob(&mut g, d_y, &dpy, fy)?;
    let pfx = prob(&mut g, d_x, &dpx, fx)?;
    let adv_y = generator_adversarial(&mut g, pfy, cfg.non_saturating)?;
    let adv_x = generator_adversarial(&mut g, pfx, cfg.non_saturating)?;
    let adv = g.add(adv_y, adv_x)?;
    let rec_x = g_yx.forward(&mut g, &pyx, fy)?;
    let rec_y = g_xy.forward(&mut g, &pxy, fx)?;
    let cx = g.l1(rec_x, xv)?;
    let cy = g.l1(rec_y, yv)?;
    let cycle = g.add(cx, cy)?;
    let weighted = g.scale(cycle, cfg.cycle_weight);
    let loss = g.add(adv, weighted)?;
    let terms = vec![d_loss, item(&g, adv), item(&g, cycle)];
    if train {
        g.backward(loss)?;
        let grads_xy = g.grads(&pxy);
        let grads_yx = g.grads(&pyx);
        og_xy.as_mut().expect("train").step(&mut g_xy.params, &grads_xy)?;
        og_yx.as_mut().expect("train").step(&mut g_yx.params, &grads_yx)?;
    }
    Ok(terms)
}

/// One pass of the model's objective on `(x, t)`; `opts` present means
/// the networks are updated.
fn run_pass(
    model: &mut Trained,
    opts: Option<&mut Optimizers>,
    x: Tensor<f32>,
    t: Tensor<f32>,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    match (model, opts) {
        (Trained::Unet(net), None) => unet_pass(net, None, x, t),
        (Trained::Unet(net), Some(Optimizers::Unet(a))) => unet_pass(net, Some(a), x, t),
        (
            Trained::Pix2pix {
                generator,
                discriminator,
            },
            opts,
        ) => {
            let nets = Pix2pixNets {
                gen: generator,
                disc: discriminator,
            };
            let opt = match opts {
                Some(Optimizers::Pix2pix { g, d }) => Some((g, d)),
                None => None,
                Some(_) => unreachable!("optimizers built for the same model"),
            };
            pix2pix_pass(nets, opt, x, t, cfg)
        }
        (Trained::Cycle { g_xy, g_yx, d_x, d_y }, opts) => {
            let nets = CycleNets { g_xy, g_yx, d_x, d_y };
            let opt = match opts {
                Some(Optimizers::Cycle { g_xy, g_yx, d_x, d_y }) => Some((g_xy, g_yx, d_x, d_y)),
                None => None,
                Some(_) => unreachable!("optimizers built for the same model"),
            };
            cycle_pass(nets, opt, x, t, cfg)
        }
        (Trained::Unet(_), Some(_)) => unreachable!("optimizers built for the same model"),
    }
}

fn build(cfg: &TrainConfig, seed: u64) -> Result<(Trained, Optimizers)> {
    let mut rng = rng_from_seed(mix64(seed, INIT_STREAM));
    let mut unet = || -> Result<UNet<f32>> {
        let mut n = UNet::new(cfg.unet)?;
        init(&mut n.params, cfg.init, &mut rng);
        Ok(n)
    };
    let model = match cfg.model {
        ModelKind::Unet => Trained::Unet(unet()?),
        ModelKind::Pix2pixSmoke => {
            let generator = unet()?;
            let mut discriminator = PatchDiscriminator::new(cfg.discriminator_config())?;
            init(&mut discriminator.params, cfg.init, &mut rng);
            Trained::Pix2pix {
                generator,
                discriminator,
            }
        }
        ModelKind::CycleganSmoke => {
            let g_xy = unet()?;
            let g_yx = unet()?;
            let mut d_x = PatchDiscriminator::new(cfg.discriminator_config())?;
            init(&mut d_x.params, cfg.init, &mut rng);
            let mut d_y = PatchDiscriminator::new(cfg.discriminator_config())?;
            init(&mut d_y.params, cfg.init, &mut rng);
            Trained::Cycle { g_xy, g_yx, d_x, d_y }
        }
    };
    let opts = match &model {
        Trained::Unet(n) => Optimizers::Unet(adam(&n.params, cfg)?),
        Trained::Pix2pix {
            generator,
            discriminator,
        } => Optimizers::Pix2pix {
            g: adam(&generator.params, cfg)?,
            d: adam(&discriminator.params, cfg)?,
        },
        Trained::Cycle { g_xy, g_yx, d_x, d_y } => Optimizers::Cycle {
            g_xy: adam(&g_xy.params, cfg)?,
            g_yx: adam(&g_yx.params, cfg)?,
            d_x: adam(&d_x.params, cfg)?,
            d_y: adam(&d_y.params, cfg)?,
        },
    };
    Ok((model, opts))
}

/// Optimizer steps and the epoch length used by the learning-rate schedule.
pub fn step_plan(cfg: &TrainConfig, train_pairs: usize) -> (usize, usize) {
    let per_epoch = train_pairs.div_ceil(cfg.batch_size).max(1);
    (cfg.steps.unwrap_or(cfg.epochs * per_epoch), per_epoch)
}

/// Trains on the given pairs. Validation of `cfg` and of the data happens
/// before any network is built.
pub fn train(pairs: &[Pair], cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(HarnessError::config("training split is empty"));
    }
    let s = cfg.input_size;
    if let Some(p) = pairs.iter().find(|p| p.noisy.width() < s || p.noisy.height() < s) {
        return Err(HarnessError::config(format!(
            "pair {:?} is {:?}, smaller than train.input_size {s}",
            p.id,
            p.noisy.dims()
        )));
    }
    let (steps, per_epoch) = step_plan(cfg, pairs.len());
    let total_epochs = steps.div_ceil(per_epoch);
    let decay_start = total_epochs.saturating_sub(cfg.decay_epochs);

    let (mut model, mut opts) = build(cfg, seed)?;
    let monitor = &pairs[..pairs.len().min(MONITOR_PAIRS)];
    let (mx, mt) = center_crops(monitor, s)?;
    let initial = run_pass(&mut model, None, mx.clone(), mt.clone(), cfg)?;

    let terms = loss_terms(cfg.model);
    let mut rows = vec![(0, lr_schedule(cfg.lr, 0, total_epochs, decay_start), initial.clone())];
    let mut batches = Batcher::new(pairs.len(), mix64(seed, BATCH_STREAM));
    let mut partners = Batcher::new(pairs.len(), mix64(seed, BATCH_STREAM + 1));
    let mut crop_rng = rng_from_seed(mix64(seed, BATCH_STREAM + 2));
    for step in 1..=steps {
        let lr = lr_schedule(cfg.lr, (step - 1) / per_epoch, total_epochs, decay_start);
        opts.set_lr(lr);
        let idx = batches.next(cfg.batch_size);
        let batch: Vec<&Pair> = idx.iter().map(|&i| &pairs[i]).collect();
        let (x, mut t) = random_crops(&batch, s, &mut crop_rng)?;
        if cfg.model == ModelKind::CycleganSmoke {
            // Unpaired: targets come from an independent draw.
            let idx = partners.next(cfg.batch_size);
            let other: Vec<&Pair> = idx.iter().map(|&i| &pairs[i]).collect();
            t = random_crops(&other, s, &mut crop_rng)?.1;
        }
        let values = run_pass(&mut model, Some(&mut opts), x, t, cfg)?;
        rows.push((step, lr, values));
    }
    let final_monitor = run_pass(&mut model, None, mx, mt, cfg)?;

    let summary = TrainSummary {
        model: cfg.model,
        steps,
        train_pairs: pairs.len(),
        monitor_pairs: monitor.len(),
        loss_terms: terms.iter().map(|t| t.to_string()).collect(),
        initial_monitor: initial,
        final_monitor,
    };
    Ok(TrainOutcome {
        model,
        model_config: ModelConfig::from_train(cfg),
        history: History { terms, rows },
        summary,
    })
}

/// Trains on the train split of `data` and writes the checkpoint, history
/// and summary into `out`.
pub fn cmd_train(data: &Path, out: &Path, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    let manifest = open_dataset(data)?;
    if manifest.counts().train == 0 {
        return Err(HarnessError::config("training split is empty"));
    }
    let pairs = load_split(data, &manifest, Split::Train)?;
    let outcome = train(&pairs, cfg, seed)?;
    std::fs::create_dir_all(out).map_err(HarnessError::io(out))?;
    save_model(&out.join(CHECKPOINT_FILE), &outcome.model_config, &outcome.model.named_params())?;
    let history = out.join(HISTORY_FILE);
    std::fs::write(&history, outcome.history.to_tsv()).map_err(HarnessError::io(&history))?;
    let summary = out.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
    std::fs::write(&summary, json + "\n").map_err(HarnessError::io(&summary))?;
    Ok(outcome)
}

/// Mean BCE of `net` on `(x, t)`.
pub fn bce_of(net: &UNet<f32>, x: &Tensor<f32>, t: &Tensor<f32>) -> Result<f64> {
    let y = net.infer(x)?;
    Ok(f64::from(bce_loss(&y, t)?.0))
}
