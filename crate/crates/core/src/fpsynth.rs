//! Procedural master fingerprints and the degradation model that turns them
//! into noisy partial prints.
//!
//! Masters come from iterated oriented Gabor filtering: sparse random blobs
//! are repeatedly band-passed along a class-specific orientation field until
//! ridges fill the finger footprint, then softly binarized (ridges dark,
//! valleys white).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::{Error, GrayImage, Result};

pub const MIN_MASTER_DIM: usize = 64;
pub const BACKGROUND: f64 = 1.0;

pub const MAX_ROTATION_DEG: f64 = 10.0;
pub const MAX_TRANSLATION_PX: i32 = 10;
pub const MAX_BLUR_SIGMA: f64 = 2.5;
pub const MAX_NOISE_SIGMA: f64 = 0.25;
pub const MAX_SCRATCH_COUNT: u32 = 8;
pub const SCRATCH_WIDTH_RANGE: (f64, f64) = (1.0, 3.0);
pub const MAX_OCCLUSION: f64 = 0.15;

const RIDGE_PERIOD_RANGE: (f64, f64) = (6.0, 12.0);
const GABOR_ITERATIONS: (usize, usize) = (4, 8);
const ORIENTATION_BINS: usize = 36;
// Slope of the final soft binarization; ridge edges span roughly two pixels.
const INK_GAIN: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternClass {
    Arch,
    Loop,
    Whorl,
}

impl PatternClass {
    pub const ALL: [PatternClass; 3] = [PatternClass::Arch, PatternClass::Loop, PatternClass::Whorl];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternClass::Arch => "arch",
            PatternClass::Loop => "loop",
            PatternClass::Whorl => "whorl",
        }
    }
}

impl std::str::FromStr for PatternClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arch" => Ok(PatternClass::Arch),
            "loop" => Ok(PatternClass::Loop),
            "whorl" => Ok(PatternClass::Whorl),
            other => Err(Error::invalid(format!("unknown pattern class {other:?}"))),
        }
    }
}

/// Singular point position in pixels.
type Point = (f64, f64);

/// Per-pixel ridge-flow orientation in `[0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    pub width: usize,
    pub height: usize,
    pub angles: Vec<f64>,
    pub pattern_class: PatternClass,
}

fn wrap_orientation(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

impl OrientationField {
    /// Zero-pole orientation model: each core adds half its argument, each
    /// delta subtracts half. Arches have no singular points and use a smooth
    /// hump profile instead.
    pub fn synthesize<R: Rng + ?Sized>(
        pattern_class: PatternClass,
        width: usize,
        height: usize,
        rng: &mut R,
    ) -> Self {
        let (w, h) = (width as f64, height as f64);
        let jitter = |rng: &mut R, scale: f64| rng.random_range(-scale..=scale);
        let (cores, deltas): (Vec<Point>, Vec<Point>) = match pattern_class {
            PatternClass::Arch => (vec![], vec![]),
            PatternClass::Loop => {
                let core = (w * 0.5 + jitter(rng, 0.08 * w), h * 0.42 + jitter(rng, 0.05 * h));
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let delta = (
                    core.0 + side * w * (0.28 + jitter(rng, 0.05)),
                    h * 0.72 + jitter(rng, 0.05 * h),
                );
                (vec![core], vec![delta])
            }
            PatternClass::Whorl => {
                let cx = w * 0.5 + jitter(rng, 0.05 * w);
                let cy = h * 0.47 + jitter(rng, 0.05 * h);
                let half_gap = w * (0.04 + rng.random_range(0.0..0.04));
                (vec![(cx - half_gap, cy), (cx + half_gap, cy)], vec![])
            }
        };
        let arch_bend = rng.random_range(0.6..1.4);
        let base = jitter(rng, 0.08);

        let mut angles = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (px, py) = (x as f64, y as f64);
                let theta = match pattern_class {
                    PatternClass::Arch => {
                        let slope = -arch_bend * (PI * px / w).cos() * (1.0 - 0.7 * py / h);
                        slope.atan()
                    }
                    _ => {
                        let arg = |(sx, sy): (f64, f64)| (py - sy).atan2(px - sx);
                        let c: f64 = cores.iter().copied().map(arg).sum();
                        let d: f64 = deltas.iter().copied().map(arg).sum();
                        let flow = 0.5 * (c - d);
                        // two adjacent cores give radial flow; ridges circle them
                        if pattern_class == PatternClass::Whorl {
                            flow + PI / 2.0
                        } else {
                            flow
                        }
                    }
                };
                angles.push(wrap_orientation(theta + base));
            }
        }
        Self {
            width,
            height,
            angles,
            pattern_class,
        }
    }

    #[inline]
    pub fn angle(&self, x: usize, y: usize) -> f64 {
        self.angles[y * self.width + x]
    }
}

/// Zero-mean even Gabor kernels for a fixed ridge period, one per orientation bin.
struct GaborBank {
    radius: usize,
    kernels: Vec<Vec<f64>>,
}

impl GaborBank {
    fn new(period: f64) -> Self {
        let sigma = 0.45 * period;
        let radius = (2.5 * sigma).ceil() as usize;
        let side = 2 * radius + 1;
        let freq = 1.0 / period;
        let kernels = (0..ORIENTATION_BINS)
            .map(|b| {
                let theta = PI * b as f64 / ORIENTATION_BINS as f64;
                let (s, c) = theta.sin_cos();
                let mut k = Vec::with_capacity(side * side);
                for v in 0..side {
                    for u in 0..side {
                        let du = u as f64 - radius as f64;
                        let dv = v as f64 - radius as f64;
                        let across = -du * s + dv * c;
                        let env = (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp();
                        k.push(env * (2.0 * PI * freq * across).cos());
                    }
                }
                let mean = k.iter().sum::<f64>() / k.len() as f64;
                k.iter_mut().for_each(|t| *t -= mean);
                let norm = k.iter().map(|t| t.abs()).sum::<f64>();
                k.iter_mut().for_each(|t| *t /= norm);
                k
            })
            .collect();
        Self { radius, kernels }
    }

    fn bin(theta: f64) -> usize {
        ((theta / PI * ORIENTATION_BINS as f64).round() as usize) % ORIENTATION_BINS
    }

    /// One pass of spatially varying filtering with zero padding.
    fn filter(&self, field: &[f64], orient: &OrientationField) -> Vec<f64> {
        let (w, h) = (orient.width, orient.height);
        let r = self.radius as isize;
        let side = 2 * self.radius + 1;
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let k = &self.kernels[Self::bin(orient.angle(x, y))];
                let mut acc = 0.0;
                for dv in -r..=r {
                    let sy = y as isize + dv;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let krow = &k[(dv + r) as usize * side..][..side];
                    let row = &field[sy as usize * w..][..w];
                    let x_lo = (x as isize - r).max(0);
                    let x_hi = (x as isize + r).min(w as isize - 1);
                    for sx in x_lo..=x_hi {
                        acc += krow[(sx - x as isize + r) as usize] * row[sx as usize];
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    }
}

/// Smooth elliptical finger footprint: 1 inside, falling to 0 over a few pixels.
fn footprint(width: usize, height: usize, x: usize, y: usize) -> f64 {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let ax = 0.49 * width as f64;
    let ay = 0.49 * height as f64;
    let dx = (x as f64 - cx) / ax;
    let dy = (y as f64 - cy) / ay;
    let rho = (dx * dx + dy * dy).sqrt();
    let edge_px = 4.0 / ax.min(ay);
    ((1.0 - rho) / edge_px).clamp(0.0, 1.0)
}

/// Deterministic master fingerprint for `(seed, width, height, class)`.
pub fn generate_master(
    seed: u64,
    width: usize,
    height: usize,
    pattern_class: PatternClass,
) -> Result<GrayImage> {
    if width < MIN_MASTER_DIM || height < MIN_MASTER_DIM {
        return Err(Error::invalid(format!(
            "master fingerprint must be at least {MIN_MASTER_DIM}x{MIN_MASTER_DIM}, got {width}x{height}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let orient = OrientationField::synthesize(pattern_class, width, height, &mut rng);
    let period = rng.random_range(RIDGE_PERIOD_RANGE.0..=RIDGE_PERIOD_RANGE.1);
    let iterations = rng.random_range(GABOR_ITERATIONS.0..=GABOR_ITERATIONS.1);
    let bank = GaborBank::new(period);

    let mut field = vec![0.0; width * height];
    let spacing = 2.5 * period;
    let blobs = ((width * height) as f64 / (spacing * spacing)).ceil() as usize;
    for _ in 0..blobs {
        let bx = rng.random_range(0..width);
        let by = rng.random_range(0..height);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (x, y) = (bx as isize + dx, by as isize + dy);
                if (0..width as isize).contains(&x) && (0..height as isize).contains(&y) {
                    let fall = if dx == 0 && dy == 0 { 1.0 } else { 0.5 };
                    field[y as usize * width + x as usize] += sign * fall;
                }
            }
        }
    }

    for _ in 0..iterations {
        field = bank.filter(&field, &orient);
        let rms = (field.iter().map(|v| v * v).sum::<f64>() / field.len() as f64).sqrt();
        if rms > 0.0 {
            field.iter_mut().for_each(|v| *v = (2.5 * *v / rms).tanh());
        }
    }

    GrayImage::from_fn(width, height, |x, y| {
        let ink = 0.5 * (1.0 + (INK_GAIN * field[y * width + x]).tanh());
        1.0 - footprint(width, height, x, y) * ink
    })
}

/// Parameters of one degraded impression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionParams {
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub rotation_deg: f64,
    pub translation_px: [i32; 2],
    pub scratch_count: u32,
    pub scratch_width_px: f64,
    pub occlusion_fraction: f64,
}

impl DistortionParams {
    /// The identity distortion.
    pub fn none() -> Self {
        Self {
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            rotation_deg: 0.0,
            translation_px: [0, 0],
            scratch_count: 0,
            scratch_width_px: 1.0,
            occlusion_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("distortion {what} out of range: {self:?}")));
        if !(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG).contains(&self.rotation_deg) {
            return bad("rotation_deg");
        }
        if self
            .translation_px
            .iter()
            .any(|t| !(-MAX_TRANSLATION_PX..=MAX_TRANSLATION_PX).contains(t))
        {
            return bad("translation_px");
        }
        if !(self.blur_sigma >= 0.0) || !(self.noise_sigma >= 0.0) {
            return bad("sigma");
        }
        if !(self.scratch_width_px > 0.0) {
            return bad("scratch_width_px");
        }
        if !(0.0..1.0).contains(&self.occlusion_fraction) {
            return bad("occlusion_fraction");
        }
        Ok(())
    }
}

/// Uniform draw of every distortion field within its declared range.
pub fn sample_distortion<R: Rng + ?Sized>(rng: &mut R) -> DistortionParams {
    DistortionParams {
        blur_sigma: rng.random_range(0.0..=MAX_BLUR_SIGMA),
        noise_sigma: rng.random_range(0.0..=MAX_NOISE_SIGMA),
        rotation_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
        translation_px: [
            rng.random_range(-MAX_TRANSLATION_PX..=MAX_TRANSLATION_PX),
            rng.random_range(-MAX_TRANSLATION_PX..=MAX_TRANSLATION_PX),
        ],
        scratch_count: rng.random_range(0..=MAX_SCRATCH_COUNT),
        scratch_width_px: rng.random_range(SCRATCH_WIDTH_RANGE.0..=SCRATCH_WIDTH_RANGE.1),
        occlusion_fraction: rng.random_range(0.0..MAX_OCCLUSION),
    }
}

/// Bilinear rotation about the image center. Samples falling outside the
/// source read as background.
pub fn rotate(img: &GrayImage, degrees: f64) -> GrayImage {
    if degrees == 0.0 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let (s, c) = (degrees.to_radians()).sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            BACKGROUND
        } else {
            img.get(x as usize, y as usize)
        }
    };
    GrayImage::from_fn(w, h, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        // inverse map: rotate the output coordinate by -θ
        let sx = c * dx + s * dy + cx;
        let sy = -s * dx + c * dy + cy;
        let x0 = sx.floor();
        let y0 = sy.floor();
        let fx = sx - x0;
        let fy = sy - y0;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
        let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    })
    .expect("rotation preserves dimensions")
}

/// Integer shift; exposed pixels become background.
pub fn translate(img: &GrayImage, [tx, ty]: [i32; 2]) -> GrayImage {
    if tx == 0 && ty == 0 {
        return img.clone();
    }
    let (w, h) = img.dims();
    GrayImage::from_fn(w, h, |x, y| {
        let sx = x as i64 - i64::from(tx);
        let sy = y as i64 - i64::from(ty);
        if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
            BACKGROUND
        } else {
            img.get(sx as usize, sy as usize)
        }
    })
    .expect("translation preserves dimensions")
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let (w, h) = img.dims();
    let src = img.pixels();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, i) in kernel.iter().zip(-radius..=radius) {
                let sx = (x as isize + i).clamp(0, w as isize - 1) as usize;
                acc += k * src[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, i) in kernel.iter().zip(-radius..=radius) {
                let sy = (y as isize + i).clamp(0, h as isize - 1) as usize;
                acc += k * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    GrayImage::from_clamped(w, h, out).expect("blur preserves dimensions")
}

/// Erases random rectangles until at least `fraction` of the area is background.
pub fn occlude<R: Rng + ?Sized>(img: &GrayImage, fraction: f64, rng: &mut R) -> GrayImage {
    if fraction <= 0.0 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let target = (fraction * (w * h) as f64).round() as usize;
    let mut erased = vec![false; w * h];
    let mut count = 0;
    for _ in 0..1000 {
        if count >= target {
            break;
        }
        let pw = ((w as f64 * rng.random_range(0.1..0.3)).round() as usize).max(1);
        let ph = ((h as f64 * rng.random_range(0.1..0.3)).round() as usize).max(1);
        let x0 = rng.random_range(0..=w - pw.min(w));
        let y0 = rng.random_range(0..=h - ph.min(h));
        for y in y0..(y0 + ph).min(h) {
            for x in x0..(x0 + pw).min(w) {
                if count < target && !erased[y * w + x] {
                    erased[y * w + x] = true;
                    count += 1;
                }
            }
        }
    }
    let mut out = img.clone();
    out.map_in_place(|x, y, p| if erased[y * w + x] { BACKGROUND } else { p });
    out
}

/// Additive Gaussian noise `σ·z`, clamped into `[0, 1]`.
pub fn add_noise<R: Rng + ?Sized>(img: &GrayImage, sigma: f64, rng: &mut R) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let mut out = img.clone();
    out.map_in_place(|_, _, p| {
        let z: f64 = rng.sample(StandardNormal);
        p + sigma * z
    });
    out
}

/// Rotate, translate, occlude, blur, then add noise. Scratches are a
/// separate stage ([`add_scratches`]).
pub fn apply_distortion<R: Rng + ?Sized>(
    master: &GrayImage,
    params: &DistortionParams,
    rng: &mut R,
) -> GrayImage {
    let img = rotate(master, params.rotation_deg);
    let img = translate(&img, params.translation_px);
    let img = occlude(&img, params.occlusion_fraction, rng);
    let img = gaussian_blur(&img, params.blur_sigma);
    add_noise(&img, params.noise_sigma, rng)
}

fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((px - a.0) * vx + (py - a.1) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (px - (a.0 + t * vx), py - (a.1 + t * vy));
    (dx * dx + dy * dy).sqrt()
}

/// Paints `count` random polylines of 3–6 segments in white (erasure).
/// Strokes are hard-edged: a pixel is painted when its center lies within
/// half the stroke width (at least half a pixel) of a segment.
pub fn add_scratches<R: Rng + ?Sized>(
    img: &GrayImage,
    rng: &mut R,
    count: u32,
    width_px: f64,
) -> GrayImage {
    if count == 0 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let reach = (width_px / 2.0).max(0.5);
    let span = w.min(h) as f64;
    let mut painted = vec![false; w * h];
    for _ in 0..count {
        let segments = rng.random_range(3..=6);
        let mut p = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let mut heading = rng.random_range(0.0..2.0 * PI);
        for _ in 0..segments {
            heading += rng.random_range(-0.6..0.6);
            let len = span * rng.random_range(0.05..0.2);
            let q = (p.0 + len * heading.cos(), p.1 + len * heading.sin());
            let x_lo = (p.0.min(q.0) - reach).floor().max(0.0) as usize;
            let y_lo = (p.1.min(q.1) - reach).floor().max(0.0) as usize;
            let x_hi = ((p.0.max(q.0) + reach).ceil().max(0.0) as usize).min(w - 1);
            let y_hi = ((p.1.max(q.1) + reach).ceil().max(0.0) as usize).min(h - 1);
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    if segment_distance(x as f64, y as f64, p, q) <= reach {
                        painted[y * w + x] = true;
                    }
                }
            }
            p = q;
        }
    }
    let mut out = img.clone();
    out.map_in_place(|x, y, v| if painted[y * w + x] { 1.0 } else { v });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mse;
    use crate::rng::rng_from_seed;

    fn master() -> GrayImage {
        generate_master(7, 96, 96, PatternClass::Loop).unwrap()
    }

    #[test]
    fn rejects_small_canvas() {
        assert!(matches!(
            generate_master(1, 63, 100, PatternClass::Arch),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn orientation_angles_are_half_open() {
        for class in PatternClass::ALL {
            let f = OrientationField::synthesize(class, 70, 90, &mut rng_from_seed(3));
            assert_eq!(f.angles.len(), 70 * 90);
            assert!(f.angles.iter().all(|a| (0.0..PI).contains(a)));
        }
    }

    #[test]
    fn masters_have_ridges_and_white_surround() {
        for class in PatternClass::ALL {
            let m = generate_master(11, 80, 100, class).unwrap();
            assert_eq!(m.get(0, 0), 1.0);
            let inner = m.center_crop(40, 40).unwrap();
            let dark = inner.pixels().iter().filter(|&&p| p < 0.2).count();
            let light = inner.pixels().iter().filter(|&&p| p > 0.8).count();
            assert!(dark > 200 && light > 200, "{class:?}: {dark} dark / {light} light");
        }
    }

    #[test]
    fn identity_distortion_is_bit_exact() {
        let m = master();
        let out = apply_distortion(&m, &DistortionParams::none(), &mut rng_from_seed(1));
        assert_eq!(out, m);
    }

    #[test]
    fn translation_fills_background() {
        let m = master();
        let t = translate(&m, [3, -2]);
        assert_eq!(t.get(0, 50), 1.0);
        assert_eq!(t.get(50, 95), 1.0);
        assert_eq!(t.get(53, 48), m.get(50, 50));
    }

    #[test]
    fn occlusion_hits_requested_fraction() {
        let black = GrayImage::filled(100, 80, 0.0).unwrap();
        let out = occlude(&black, 0.12, &mut rng_from_seed(5));
        let white = out.pixels().iter().filter(|&&p| p == 1.0).count();
        assert_eq!(white, (0.12f64 * 8000.0).round() as usize);
    }

    #[test]
    fn blur_preserves_constants() {
        let c = GrayImage::filled(20, 20, 0.3).unwrap();
        let b = gaussian_blur(&c, 1.7);
        assert!(b.pixels().iter().all(|p| (p - 0.3).abs() < 1e-12));
    }

    #[test]
    fn noise_monotone_in_sigma() {
        let m = master();
        let mut last = 0.0;
        for sigma in [0.0, 0.02, 0.05, 0.1, 0.2, 0.25] {
            let p = DistortionParams {
                noise_sigma: sigma,
                ..DistortionParams::none()
            };
            let e = mse(&m, &apply_distortion(&m, &p, &mut rng_from_seed(9))).unwrap();
            assert!(e >= last, "sigma {sigma}: {e} < {last}");
            last = e;
        }
    }

    #[test]
    fn scratches_zero_count_is_identity() {
        let m = master();
        assert_eq!(add_scratches(&m, &mut rng_from_seed(2), 0, 2.0), m);
    }

    #[test]
    fn validate_catches_ranges() {
        let mut p = DistortionParams::none();
        assert!(p.validate().is_ok());
        p.rotation_deg = 10.5;
        assert!(p.validate().is_err());
        p = DistortionParams::none();
        p.translation_px = [0, -11];
        assert!(p.validate().is_err());
        p = DistortionParams::none();
        p.occlusion_fraction = 1.0;
        assert!(p.validate().is_err());
    }
}
