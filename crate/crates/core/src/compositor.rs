//! Background textures and alpha compositing of prints over them.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fpsynth::gaussian_blur;
use crate::rng::{mix64, rng_from_seed};
use crate::{Error, GrayImage, Result};

pub const DEFAULT_ALPHA: f64 = 0.45;
pub const MIN_TEXTURE_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextureOrigin {
    File,
    Procedural,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextureSource {
    pub id: String,
    pub image: GrayImage,
    pub origin: TextureOrigin,
}

/// Weight of the foreground print in the blend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendConfig {
    alpha: f64,
}

impl BlendConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// `g = α·fg + (1 − α)·bg` per pixel.
pub fn alpha_blend(fg: &GrayImage, bg: &GrayImage, cfg: BlendConfig) -> Result<GrayImage> {
    fg.same_dims(bg, "alpha_blend")?;
    let a = cfg.alpha;
    let pixels = fg
        .pixels()
        .iter()
        .zip(bg.pixels())
        .map(|(&f, &b)| blend_scalar(f, b, a))
        .collect();
    GrayImage::from_clamped(fg.width(), fg.height(), pixels)
}

/// The two-term blend, pinned into `[min(fg, bg), max(fg, bg)]` so that a
/// final rounding can never leave the convex hull.
#[inline]
pub fn blend_scalar(fg: f64, bg: f64, alpha: f64) -> f64 {
    (alpha * fg + (1.0 - alpha) * bg).clamp(fg.min(bg), fg.max(bg))
}

/// Crops a `width × height` window at a random offset. Textures smaller than
/// the window are tiled periodically first.
pub fn prepare_background<R: Rng + ?Sized>(
    tex: &TextureSource,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<GrayImage> {
    let (tw, th) = tex.image.dims();
    if tw < MIN_TEXTURE_DIM || th < MIN_TEXTURE_DIM {
        return Err(Error::invalid(format!(
            "texture {:?} is {tw}x{th}, below the {MIN_TEXTURE_DIM}x{MIN_TEXTURE_DIM} minimum",
            tex.id
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("background dimensions must be positive"));
    }
    if tw >= width && th >= height {
        let x0 = rng.random_range(0..=tw - width);
        let y0 = rng.random_range(0..=th - height);
        return tex.image.crop(x0, y0, width, height);
    }
    let x0 = rng.random_range(0..tw);
    let y0 = rng.random_range(0..th);
    GrayImage::from_fn(width, height, |x, y| {
        tex.image.get((x0 + x) % tw, (y0 + y) % th)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureKind {
    /// Sinusoidal stripes at a seed-chosen angle and period.
    Stripes,
    /// Two-level checkerboard; `period` is the full cycle length in pixels.
    Checker { period: usize },
    /// Multi-octave bilinear value noise.
    PerlinLike,
    /// Per-pixel random intensities with sparse bright flecks.
    Speckle,
}

impl TextureKind {
    pub fn name(&self) -> &'static str {
        match self {
            TextureKind::Stripes => "stripes",
            TextureKind::Checker { .. } => "checker",
            TextureKind::PerlinLike => "perlin",
            TextureKind::Speckle => "speckle",
        }
    }
}

fn stretch(values: &mut [f64], lo: f64, hi: f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    for v in values.iter_mut() {
        *v = if span > 0.0 {
            lo + (hi - lo) * (*v - min) / span
        } else {
            0.5 * (lo + hi)
        };
    }
}

/// Deterministic synthetic texture whose values cover at least `[0.2, 0.8]`.
pub fn procedural_texture(
    kind: TextureKind,
    seed: u64,
    width: usize,
    height: usize,
) -> Result<TextureSource> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("texture dimensions must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let n = width * height;
    let image = match kind {
        TextureKind::Stripes => {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let period = rng.random_range(5.0..40.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let (s, c) = angle.sin_cos();
            GrayImage::from_fn(width, height, |x, y| {
                let t = (x as f64 * c + y as f64 * s) / period;
                0.5 + 0.4 * (std::f64::consts::TAU * t + phase).sin()
            })?
        }
        TextureKind::Checker { period } => {
            if period < 2 || period % 2 != 0 {
                return Err(Error::invalid(format!(
                    "checker period must be an even number ≥ 2, got {period}"
                )));
            }
            let lo = rng.random_range(0.05..0.2);
            let hi = rng.random_range(0.8..0.95);
            let cell = period / 2;
            GrayImage::from_fn(width, height, |x, y| {
                if (x / cell + y / cell) % 2 == 0 {
                    lo
                } else {
                    hi
                }
            })?
        }
        TextureKind::PerlinLike => {
            let mut acc = vec![0.0; n];
            let mut amplitude = 1.0;
            let mut cell = (width.max(height) as f64 / 4.0).max(4.0);
            for _ in 0..5 {
                let gw = (width as f64 / cell).ceil() as usize + 2;
                let gh = (height as f64 / cell).ceil() as usize + 2;
                let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(0.0..1.0)).collect();
                for y in 0..height {
                    for x in 0..width {
                        let gx = x as f64 / cell;
                        let gy = y as f64 / cell;
                        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
                        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
                        let fx = smooth(gx - ix as f64);
                        let fy = smooth(gy - iy as f64);
                        let g = |i: usize, j: usize| grid[j * gw + i];
                        let top = g(ix, iy) * (1.0 - fx) + g(ix + 1, iy) * fx;
                        let bot = g(ix, iy + 1) * (1.0 - fx) + g(ix + 1, iy + 1) * fx;
                        acc[y * width + x] += amplitude * (top * (1.0 - fy) + bot * fy);
                    }
                }
                amplitude *= 0.5;
                cell = (cell / 2.0).max(1.0);
            }
            stretch(&mut acc, 0.1, 0.9);
            GrayImage::new(width, height, acc)?
        }
        TextureKind::Speckle => {
            let base: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut img = GrayImage::new(width, height, base)?;
            img = gaussian_blur(&img, 0.6);
            let mut values = img.into_pixels();
            for v in values.iter_mut() {
                if rng.random_bool(0.02) {
                    *v = 1.0;
                }
            }
            stretch(&mut values, 0.05, 0.95);
            GrayImage::new(width, height, values)?
        }
    };
    Ok(TextureSource {
        id: format!("proc-{}-{seed:016x}", kind.name()),
        image,
        origin: TextureOrigin::Procedural,
    })
}

/// Read-only set of textures keyed by unique id, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct TextureLibrary {
    textures: Vec<TextureSource>,
}

impl TextureLibrary {
    pub fn new(textures: Vec<TextureSource>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for t in &textures {
            if !seen.insert(t.id.as_str()) {
                return Err(Error::invalid(format!("duplicate texture id {:?}", t.id)));
            }
            let (w, h) = t.image.dims();
            if w < MIN_TEXTURE_DIM || h < MIN_TEXTURE_DIM {
                return Err(Error::invalid(format!(
                    "texture {:?} is {w}x{h}, below the {MIN_TEXTURE_DIM}x{MIN_TEXTURE_DIM} minimum",
                    t.id
                )));
            }
        }
        Ok(Self { textures })
    }

    /// `count` procedural textures cycling through every kind.
    pub fn procedural(seed: u64, count: usize, width: usize, height: usize) -> Result<Self> {
        let textures = (0..count)
            .map(|i| {
                let s = mix64(seed, i as u64);
                let kind = match i % 4 {
                    0 => TextureKind::PerlinLike,
                    1 => TextureKind::Stripes,
                    2 => TextureKind::Speckle,
                    _ => TextureKind::Checker {
                        period: 2 * (3 + (s % 14) as usize),
                    },
                };
                procedural_texture(kind, s, width, height)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(textures)
    }

    pub fn len(&self) -> usize {
        self.textures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.textures.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&TextureSource> {
        self.textures.get(index)
    }

    pub fn by_id(&self, id: &str) -> Option<&TextureSource> {
        self.textures.iter().find(|t| t.id == id)
    }

    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&TextureSource> {
        if self.textures.is_empty() {
            None
        } else {
            self.textures.get(rng.random_range(0..self.textures.len()))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &TextureSource> {
        self.textures.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
        GrayImage::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn blend_endpoints_and_scalar_case() {
        let fg = img(4, 3, |x, y| (x + y) as f64 / 6.0);
        let bg = img(4, 3, |x, _| 1.0 - x as f64 / 3.0);
        assert_eq!(alpha_blend(&fg, &bg, BlendConfig::new(1.0).unwrap()).unwrap(), fg);
        assert_eq!(alpha_blend(&fg, &bg, BlendConfig::new(0.0).unwrap()).unwrap(), bg);

        let a = GrayImage::filled(1, 1, 0.8).unwrap();
        let b = GrayImage::filled(1, 1, 0.2).unwrap();
        let g = alpha_blend(&a, &b, BlendConfig::default()).unwrap();
        assert!((g.get(0, 0) - 0.47).abs() < 1e-15);
    }

    #[test]
    fn blend_rejects_mismatch_and_bad_alpha() {
        let a = GrayImage::filled(2, 2, 0.5).unwrap();
        let b = GrayImage::filled(2, 3, 0.5).unwrap();
        assert!(matches!(
            alpha_blend(&a, &b, BlendConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(BlendConfig::new(1.01).is_err());
        assert!(BlendConfig::new(-0.1).is_err());
    }

    #[test]
    fn checker_structure() {
        let t = procedural_texture(TextureKind::Checker { period: 8 }, 1, 32, 32).unwrap();
        assert_eq!(t.image.get(0, 0), t.image.get(8, 0));
        assert_ne!(t.image.get(0, 0), t.image.get(4, 0));
        assert!(procedural_texture(TextureKind::Checker { period: 3 }, 1, 32, 32).is_err());
    }

    #[test]
    fn procedural_textures_span_midrange_and_repeat() {
        let kinds = [
            TextureKind::Stripes,
            TextureKind::Checker { period: 10 },
            TextureKind::PerlinLike,
            TextureKind::Speckle,
        ];
        for kind in kinds {
            for seed in 0..5 {
                let a = procedural_texture(kind, seed, 80, 60).unwrap();
                let b = procedural_texture(kind, seed, 80, 60).unwrap();
                assert_eq!(a, b);
                let min = a.image.pixels().iter().copied().fold(1.0, f64::min);
                let max = a.image.pixels().iter().copied().fold(0.0, f64::max);
                assert!(min <= 0.2 && max >= 0.8, "{kind:?}/{seed}: [{min}, {max}]");
            }
        }
    }

    #[test]
    fn speckle_has_spread() {
        let t = procedural_texture(TextureKind::Speckle, 3, 64, 64).unwrap();
        let p = t.image.pixels();
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / p.len() as f64;
        assert!(var.sqrt() > 0.1, "std {}", var.sqrt());
    }

    #[test]
    fn background_exact_size_is_unchanged() {
        let t = procedural_texture(TextureKind::PerlinLike, 4, 40, 50).unwrap();
        let bg = prepare_background(&t, 40, 50, &mut rng_from_seed(1)).unwrap();
        assert_eq!(bg, t.image);
    }

    #[test]
    fn background_crop_and_tile() {
        let t = procedural_texture(TextureKind::Stripes, 4, 40, 40).unwrap();
        for (w, h) in [(10, 20), (40, 40), (100, 33), (275, 400)] {
            let a = prepare_background(&t, w, h, &mut rng_from_seed(8)).unwrap();
            let b = prepare_background(&t, w, h, &mut rng_from_seed(8)).unwrap();
            assert_eq!(a.dims(), (w, h));
            assert_eq!(a, b);
        }
        let tiny = TextureSource {
            id: "tiny".into(),
            image: GrayImage::filled(16, 40, 0.5).unwrap(),
            origin: TextureOrigin::File,
        };
        assert!(prepare_background(&tiny, 8, 8, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn library_rejects_duplicates() {
        let t = procedural_texture(TextureKind::Speckle, 1, 32, 32).unwrap();
        assert!(TextureLibrary::new(vec![t.clone(), t]).is_err());
        let lib = TextureLibrary::procedural(5, 8, 48, 48).unwrap();
        assert_eq!(lib.len(), 8);
        let ids: BTreeSet<_> = lib.iter().map(|t| t.id.clone()).collect();
        assert_eq!(ids.len(), 8);
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(0.0f64..=1.0, n),
                0.0f64..=1.0,
            )
        })
    }

    proptest! {
        #[test]
        fn blend_is_symmetric_and_convex((f, b, alpha) in arb_pair()) {
            let n = f.len();
            let fg = GrayImage::new(n, 1, f).unwrap();
            let bg = GrayImage::new(n, 1, b).unwrap();
            let cfg = BlendConfig::new(alpha).unwrap();
            let ab = alpha_blend(&fg, &bg, cfg).unwrap();
            let ba = alpha_blend(&bg, &fg, cfg).unwrap();
            for i in 0..n {
                let (x, y) = (fg.pixels()[i], bg.pixels()[i]);
                let g = ab.pixels()[i];
                prop_assert!((g + ba.pixels()[i] - (x + y)).abs() <= 1e-12);
                prop_assert!(g >= x.min(y) && g <= x.max(y));
            }
        }
    }
}
