use crate::{Error, Result};

/// Dense row-major grayscale image with intensities in `[0, 1]`.
///
/// Every constructor enforces the invariants: non-zero dimensions,
/// `pixels.len() == width * height`, and each pixel inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some((i, p)) = pixels
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::invalid(format!("pixel {i} = {p} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from arbitrary reals, clamping each into `[0, 1]`.
    /// NaN maps to 0.
    pub fn from_clamped(width: usize, height: usize, mut pixels: Vec<f64>) -> Result<Self> {
        for p in &mut pixels {
            *p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::from_clamped(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Mutates pixels in place; values are clamped back into `[0, 1]` afterwards.
    pub fn map_in_place(&mut self, mut f: impl FnMut(usize, usize, f64) -> f64) {
        let w = self.width;
        for (i, p) in self.pixels.iter_mut().enumerate() {
            let v = f(i % w, i / w, *p);
            *p = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::invalid(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let row = y * self.width;
            pixels.extend_from_slice(&self.pixels[row + x0..row + x0 + width]);
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Centered crop; the extra pixel of an odd margin goes to the right/bottom.
    pub fn center_crop(&self, width: usize, height: usize) -> Result<Self> {
        if width > self.width || height > self.height {
            return Err(Error::invalid(format!(
                "center crop {width}x{height} larger than {}x{} image",
                self.width, self.height
            )));
        }
        self.crop(
            (self.width - width) / 2,
            (self.height - height) / 2,
            width,
            height,
        )
    }

    /// Places images side by side, top-aligned; shorter images are padded white.
    pub fn hstack(images: &[&GrayImage]) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::invalid("hstack of zero images"));
        }
        let width: usize = images.iter().map(|im| im.width).sum();
        let height = images.iter().map(|im| im.height).max().unwrap_or(0);
        let mut pixels = vec![1.0; width * height];
        let mut x0 = 0;
        for im in images {
            for y in 0..im.height {
                let src = &im.pixels[y * im.width..(y + 1) * im.width];
                pixels[y * width + x0..y * width + x0 + im.width].copy_from_slice(src);
            }
            x0 += im.width;
        }
        Self::new(width, height, pixels)
    }

    pub(crate) fn same_dims(&self, other: &GrayImage, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::invalid(format!(
                "{what}: dimension mismatch {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn clamped_constructor_saturates() {
        let im = GrayImage::from_clamped(3, 1, vec![-0.5, 0.5, 2.0]).unwrap();
        assert_eq!(im.pixels(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn center_crop_and_hstack() {
        let im = GrayImage::from_fn(4, 4, |x, y| (x + 4 * y) as f64 / 15.0).unwrap();
        let c = im.center_crop(2, 2).unwrap();
        assert_eq!(c.get(0, 0), im.get(1, 1));
        assert_eq!(c.get(1, 1), im.get(2, 2));
        let s = GrayImage::hstack(&[&c, &im]).unwrap();
        assert_eq!(s.dims(), (6, 4));
        assert_eq!(s.get(0, 3), 1.0);
        assert_eq!(s.get(5, 3), im.get(3, 3));
    }
}
