//! Network definitions: the U-Net generator, the patch discriminator and the
//! two-generator/two-discriminator bundle used for cycle training.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::init::{init_weights_gaussian, INIT_STD};
use crate::{Graph, NeuralError, ParamSet, Result, Scalar, Tensor, Var};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub depth: usize,
    pub base_channels: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            out_channels: 1,
            depth: 3,
            base_channels: 8,
        }
    }
}

impl UNetConfig {
    /// Four levels, 64 channels at the top.
    pub fn paper_scale() -> Self {
        Self {
            depth: 4,
            base_channels: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.base_channels == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(NeuralError::invalid(format!("degenerate U-Net config {self:?}")));
        }
        Ok(())
    }

    /// Input sides must be divisible by `2^depth`.
    pub fn check_input(&self, height: usize, width: usize) -> Result<()> {
        let f = 1usize << self.depth;
        if height == 0 || width == 0 || !height.is_multiple_of(f) || !width.is_multiple_of(f) {
            return Err(NeuralError::invalid(format!(
                "U-Net of depth {} needs spatial dims divisible by {f}, got {height}x{width}",
                self.depth
            )));
        }
        Ok(())
    }

    fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

fn conv_params<T: Scalar>(p: &mut ParamSet<T>, name: &str, cout: usize, cin: usize, k: usize) {
    p.push(format!("{name}.weight"), Tensor::zeros([cout, cin, k, k]));
    p.push(format!("{name}.bias"), Tensor::zeros([1, cout, 1, 1]));
}

fn conv_transpose_params<T: Scalar>(p: &mut ParamSet<T>, name: &str, cin: usize, cout: usize, k: usize) {
    p.push(format!("{name}.weight"), Tensor::zeros([cin, cout, k, k]));
    p.push(format!("{name}.bias"), Tensor::zeros([1, cout, 1, 1]));
}

/// Hands out bound parameter vars in construction order.
struct Cursor<'a> {
    vars: &'a [Var],
    next: usize,
}

impl<'a> Cursor<'a> {
    fn new(vars: &'a [Var], expected: usize) -> Result<Self> {
        if vars.len() != expected {
            return Err(NeuralError::shape(format!(
                "{} bound parameters for a model with {expected}",
                vars.len()
            )));
        }
        Ok(Self { vars, next: 0 })
    }

    fn pair(&mut self) -> (Var, Var) {
        let out = (self.vars[self.next], self.vars[self.next + 1]);
        self.next += 2;
        out
    }
}

fn input_channels<T: Scalar>(g: &Graph<T>, x: Var, expected: usize, what: &str) -> Result<[usize; 4]> {
    let shape = g.value(x).shape();
    if shape[1] != expected {
        return Err(NeuralError::shape(format!(
            "{what} expects {expected} input channels, got {}",
            shape[1]
        )));
    }
    Ok(shape)
}

/// Encoder–decoder with channel-concatenated skips, sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct UNet<T> {
    pub cfg: UNetConfig,
    pub params: ParamSet<T>,
}

impl<T: Scalar> UNet<T> {
    /// All-zero parameters laid out as: encoder levels, bottleneck, decoder
    /// levels (deepest first), output projection.
    pub fn new(cfg: UNetConfig) -> Result<Self> {
        cfg.validate()?;
        let mut p = ParamSet::new();
        let mut cin = cfg.in_channels;
        for level in 0..cfg.depth {
            let c = cfg.channels(level);
            conv_params(&mut p, &format!("enc{level}.conv1"), c, cin, 3);
            conv_params(&mut p, &format!("enc{level}.conv2"), c, c, 3);
            cin = c;
        }
        let cb = cfg.channels(cfg.depth);
        conv_params(&mut p, "bottleneck.conv1", cb, cin, 3);
        conv_params(&mut p, "bottleneck.conv2", cb, cb, 3);
        for level in (0..cfg.depth).rev() {
            let c = cfg.channels(level);
            conv_transpose_params(&mut p, &format!("dec{level}.up"), 2 * c, c, 2);
            conv_params(&mut p, &format!("dec{level}.conv1"), c, 2 * c, 3);
            conv_params(&mut p, &format!("dec{level}.conv2"), c, c, 3);
        }
        conv_params(&mut p, "head", cfg.out_channels, cfg.channels(0), 1);
        Ok(Self { cfg, params: p })
    }

    /// Gaussian `N(0, 0.02²)` weights, zero biases.
    pub fn initialized<R: Rng + ?Sized>(cfg: UNetConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::new(cfg)?;
        init_weights_gaussian(&mut net.params, rng, INIT_STD);
        Ok(net)
    }

    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var> {
        let [_, _, h, w] = input_channels(g, x, self.cfg.in_channels, "U-Net")?;
        self.cfg.check_input(h, w)?;
        let mut cur = Cursor::new(p, self.params.len())?;
        let conv3 = |g: &mut Graph<T>, cur: &mut Cursor, x: Var| -> Result<Var> {
            let (wt, b) = cur.pair();
            let y = g.conv2d(x, wt, b, 1, 1)?;
            Ok(g.relu(y))
        };

        let mut skips = Vec::with_capacity(self.cfg.depth);
        let mut hcur = x;
        for _ in 0..self.cfg.depth {
            hcur = conv3(g, &mut cur, hcur)?;
            hcur = conv3(g, &mut cur, hcur)?;
            skips.push(hcur);
            hcur = g.max_pool2(hcur)?;
        }
        hcur = conv3(g, &mut cur, hcur)?;
        hcur = conv3(g, &mut cur, hcur)?;
        for skip in skips.into_iter().rev() {
            let (wt, b) = cur.pair();
            let up = g.conv_transpose2d(hcur, wt, b, 2)?;
            hcur = g.concat(skip, up)?;
            hcur = conv3(g, &mut cur, hcur)?;
            hcur = conv3(g, &mut cur, hcur)?;
        }
        let (wt, b) = cur.pair();
        let logits = g.conv2d(hcur, wt, b, 1, 0)?;
        Ok(g.sigmoid(logits))
    }

    /// Forward pass outside of training.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let p = g.frozen(&self.params);
        let xv = g.input(x.clone());
        let y = self.forward(&mut g, &p, xv)?;
        Ok(g.value(y).clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchDiscriminatorConfig {
    pub in_channels: usize,
    pub layers: usize,
    pub base_channels: usize,
}

impl Default for PatchDiscriminatorConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            layers: 3,
            base_channels: 8,
        }
    }
}

impl PatchDiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.base_channels == 0 || self.in_channels == 0 {
            return Err(NeuralError::invalid(format!("degenerate discriminator config {self:?}")));
        }
        Ok(())
    }

    fn channels(&self, layer: usize) -> usize {
        self.base_channels << layer.min(3)
    }
}

/// Stride-2 4×4 convolutions with LeakyReLU, then a 1×1 projection to one
/// raw score per receptive-field patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDiscriminator<T> {
    pub cfg: PatchDiscriminatorConfig,
    pub params: ParamSet<T>,
}

impl<T: Scalar> PatchDiscriminator<T> {
    pub fn new(cfg: PatchDiscriminatorConfig) -> Result<Self> {
        cfg.validate()?;
        let mut p = ParamSet::new();
        let mut cin = cfg.in_channels;
        for layer in 0..cfg.layers {
            let c = cfg.channels(layer);
            conv_params(&mut p, &format!("block{layer}"), c, cin, 4);
            cin = c;
        }
        conv_params(&mut p, "score", 1, cin, 1);
        Ok(Self { cfg, params: p })
    }

    pub fn initialized<R: Rng + ?Sized>(cfg: PatchDiscriminatorConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::new(cfg)?;
        init_weights_gaussian(&mut net.params, rng, INIT_STD);
        Ok(net)
    }

    /// Raw scores of shape `[n, 1, H/2^layers, W/2^layers]`.
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var> {
        let [_, _, h, w] = input_channels(g, x, self.cfg.in_channels, "patch discriminator")?;
        let f = 1usize << self.cfg.layers;
        if h % f != 0 || w % f != 0 {
            return Err(NeuralError::shape(format!(
                "patch discriminator with {} layers needs dims divisible by {f}, got {h}x{w}",
                self.cfg.layers
            )));
        }
        let mut cur = Cursor::new(p, self.params.len())?;
        let mut hcur = x;
        for _ in 0..self.cfg.layers {
            let (wt, b) = cur.pair();
            hcur = g.conv2d(hcur, wt, b, 2, 1)?;
            hcur = g.leaky_relu(hcur, LEAKY_SLOPE);
        }
        let (wt, b) = cur.pair();
        g.conv2d(hcur, wt, b, 1, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleGanConfig {
    /// G: X → Y
    pub generator_xy: UNetConfig,
    /// F: Y → X
    pub generator_yx: UNetConfig,
    pub disc_x: PatchDiscriminatorConfig,
    pub disc_y: PatchDiscriminatorConfig,
    pub cycle_weight: f64,
}

impl Default for CycleGanConfig {
    fn default() -> Self {
        Self {
            generator_xy: UNetConfig::default(),
            generator_yx: UNetConfig::default(),
            disc_x: PatchDiscriminatorConfig::default(),
            disc_y: PatchDiscriminatorConfig::default(),
            cycle_weight: 10.0,
        }
    }
}

impl CycleGanConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator_xy.validate()?;
        self.generator_yx.validate()?;
        self.disc_x.validate()?;
        self.disc_y.validate()?;
        if !(self.cycle_weight >= 0.0) {
            return Err(NeuralError::invalid("cycle weight must be non-negative"));
        }
        Ok(())
    }
}
