//! 2-D cross-correlation and its transpose, with explicit backward passes.
//!
//! Layouts follow the usual convention: `conv2d` weights are
//! `[out, in, k, k]`, `conv_transpose2d` weights are `[in, out, k, k]`, and
//! biases are `[1, out, 1, 1]`. Both lower to im2col plus a matrix product.

use crate::gemm::{gemm_nn, gemm_nt, gemm_tn};
use crate::{NeuralError, Result, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn new(channels: usize, height: usize, width: usize, kernel: usize, stride: usize, pad: usize) -> Result<Self> {
        if stride == 0 {
            return Err(NeuralError::invalid("stride must be at least 1"));
        }
        if height + 2 * pad < kernel || width + 2 * pad < kernel {
            return Err(NeuralError::shape(format!(
                "kernel {kernel} larger than padded input {height}x{width} (pad {pad})"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            kernel,
            stride,
            pad,
            out_h: (height + 2 * pad - kernel) / stride + 1,
            out_w: (width + 2 * pad - kernel) / stride + 1,
        })
    }

    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// `x[c, h, w]` → `cols[(c·k + ky)·k + kx, oy·out_w + ox]`.
    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let (k, s, p) = (self.kernel, self.stride, self.pad as isize);
        let ncols = self.cols();
        for c in 0..self.channels {
            let plane = &x[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut cols[row * ncols..(row + 1) * ncols];
                    for oy in 0..self.out_h {
                        let iy = (oy * s + ky) as isize - p;
                        let line = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        if iy < 0 || iy >= self.height as isize {
                            line.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * s + kx) as isize - p;
                            *v = if ix < 0 || ix >= self.width as isize {
                                T::zero()
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`]: scatter-adds columns back into `x`.
    fn col2im<T: Scalar>(&self, cols: &[T], x: &mut [T]) {
        let (k, s, p) = (self.kernel, self.stride, self.pad as isize);
        let ncols = self.cols();
        for c in 0..self.channels {
            let plane = &mut x[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &cols[row * ncols..(row + 1) * ncols];
                    for oy in 0..self.out_h {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for ox in 0..self.out_w {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < self.width as isize {
                                dst[ix as usize] += src[oy * self.out_w + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn square_kernel<T: Scalar>(w: &Tensor<T>) -> Result<usize> {
    let [_, _, kh, kw] = w.shape();
    if kh != kw || kh == 0 {
        return Err(NeuralError::shape(format!(
            "only square kernels are supported, got {kh}x{kw}"
        )));
    }
    Ok(kh)
}

fn check_bias<T: Scalar>(b: Option<&Tensor<T>>, channels: usize) -> Result<()> {
    if let Some(b) = b {
        b.expect_shape([1, channels, 1, 1], "bias")?;
    }
    Ok(())
}

fn add_bias<T: Scalar>(out: &mut [T], bias: Option<&Tensor<T>>, plane: usize) {
    if let Some(b) = bias {
        for (c, chunk) in out.chunks_mut(plane).enumerate() {
            let bc = b.data()[c % b.channels()];
            chunk.iter_mut().for_each(|v| *v += bc);
        }
    }
}

fn bias_grad<T: Scalar>(grad_out: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = grad_out.shape();
    let mut gb = vec![T::zero(); c];
    for b in 0..n {
        for (ch, plane) in grad_out.sample(b).chunks(h * w).enumerate() {
            gb[ch] += plane.iter().copied().sum::<T>();
        }
    }
    Tensor::new([1, c, 1, 1], gb).expect("bias shape")
}

/// Gradients of a convolution-like op with respect to its three inputs.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    /// `None` when the caller did not ask for the input gradient.
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

fn conv2d_geometry<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, stride: usize, pad: usize) -> Result<Geometry> {
    let k = square_kernel(w)?;
    let [_, cin, h, wd] = x.shape();
    if w.shape()[1] != cin {
        return Err(NeuralError::shape(format!(
            "conv2d: input has {cin} channels, weights expect {}",
            w.shape()[1]
        )));
    }
    Geometry::new(cin, h, wd, k, stride, pad)
}

/// Zero-padded cross-correlation; output side `⌊(H + 2p − k)/s⌋ + 1`.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let g = conv2d_geometry(x, w, stride, pad)?;
    let cout = w.shape()[0];
    check_bias(b, cout)?;
    let n = x.batch();
    let plane = g.cols();
    let mut out = vec![T::zero(); n * cout * plane];
    let mut cols = vec![T::zero(); g.rows() * plane];
    for bi in 0..n {
        g.im2col(x.sample(bi), &mut cols);
        let dst = &mut out[bi * cout * plane..(bi + 1) * cout * plane];
        gemm_nn(cout, plane, g.rows(), w.data(), &cols, dst);
        add_bias(dst, b, plane);
    }
    Tensor::new([n, cout, g.out_h, g.out_w], out)
}

pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    pad: usize,
    grad_out: &Tensor<T>,
    need_input: bool,
) -> Result<ConvGrads<T>> {
    let g = conv2d_geometry(x, w, stride, pad)?;
    let cout = w.shape()[0];
    let n = x.batch();
    grad_out.expect_shape([n, cout, g.out_h, g.out_w], "conv2d grad_out")?;
    let plane = g.cols();
    let mut cols = vec![T::zero(); g.rows() * plane];
    let mut gcols = vec![T::zero(); g.rows() * plane];
    let mut gw = vec![T::zero(); w.len()];
    let mut gx = need_input.then(|| vec![T::zero(); x.len()]);
    for bi in 0..n {
        let go = grad_out.sample(bi);
        g.im2col(x.sample(bi), &mut cols);
        gemm_nt(cout, g.rows(), plane, go, &cols, &mut gw);
        if let Some(gx) = gx.as_mut() {
            gcols.iter_mut().for_each(|v| *v = T::zero());
            gemm_tn(g.rows(), plane, cout, w.data(), go, &mut gcols);
            let per = x.len() / n;
            g.col2im(&gcols, &mut gx[bi * per..(bi + 1) * per]);
        }
    }
    Ok(ConvGrads {
        input: gx.map(|d| Tensor::new(x.shape(), d)).transpose()?,
        weight: Tensor::new(w.shape(), gw)?,
        bias: bias_grad(grad_out),
    })
}

/// Geometry of the conv2d whose input-gradient this transposed conv computes.
fn transpose_geometry<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, stride: usize) -> Result<Geometry> {
    let k = square_kernel(w)?;
    if stride == 0 {
        return Err(NeuralError::invalid("stride must be at least 1"));
    }
    let [_, cin, h, wd] = x.shape();
    if w.shape()[0] != cin {
        return Err(NeuralError::shape(format!(
            "conv_transpose2d: input has {cin} channels, weights expect {}",
            w.shape()[0]
        )));
    }
    if h == 0 || wd == 0 {
        return Err(NeuralError::shape("conv_transpose2d: empty input"));
    }
    let cout = w.shape()[1];
    let g = Geometry::new(cout, (h - 1) * stride + k, (wd - 1) * stride + k, k, stride, 0)?;
    debug_assert_eq!((g.out_h, g.out_w), (h, wd));
    Ok(g)
}

/// Transposed convolution without padding; output side `(H − 1)·s + k`.
pub fn conv_transpose2d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    stride: usize,
) -> Result<Tensor<T>> {
    let g = transpose_geometry(x, w, stride)?;
    let (cin, cout) = (x.channels(), w.shape()[1]);
    check_bias(b, cout)?;
    let n = x.batch();
    let in_plane = g.cols();
    let out_plane = g.height * g.width;
    let mut out = vec![T::zero(); n * cout * out_plane];
    let mut cols = vec![T::zero(); g.rows() * in_plane];
    for bi in 0..n {
        cols.iter_mut().for_each(|v| *v = T::zero());
        gemm_tn(g.rows(), in_plane, cin, w.data(), x.sample(bi), &mut cols);
        let dst = &mut out[bi * cout * out_plane..(bi + 1) * cout * out_plane];
        g.col2im(&cols, dst);
        add_bias(dst, b, out_plane);
    }
    Tensor::new([n, cout, g.height, g.width], out)
}

pub fn conv_transpose2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    grad_out: &Tensor<T>,
    need_input: bool,
) -> Result<ConvGrads<T>> {
    let g = transpose_geometry(x, w, stride)?;
    let (cin, cout) = (x.channels(), w.shape()[1]);
    let n = x.batch();
    grad_out.expect_shape([n, cout, g.height, g.width], "conv_transpose2d grad_out")?;
    let in_plane = g.cols();
    let mut gcols = vec![T::zero(); g.rows() * in_plane];
    let mut gw = vec![T::zero(); w.len()];
    let mut gx = need_input.then(|| vec![T::zero(); x.len()]);
    for bi in 0..n {
        g.im2col(grad_out.sample(bi), &mut gcols);
        gemm_nt(cin, g.rows(), in_plane, x.sample(bi), &gcols, &mut gw);
        if let Some(gx) = gx.as_mut() {
            let per = cin * in_plane;
            gemm_nn(cin, in_plane, g.rows(), w.data(), &gcols, &mut gx[bi * per..(bi + 1) * per]);
        }
    }
    Ok(ConvGrads {
        input: gx.map(|d| Tensor::new(x.shape(), d)).transpose()?,
        weight: Tensor::new(w.shape(), gw)?,
        bias: bias_grad(grad_out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(shape: [usize; 4]) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect()).unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = ramp([2, 1, 5, 6]);
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let w = Tensor::new([1, 1, 3, 3], k).unwrap();
        assert_eq!(conv2d(&x, &w, None, 1, 1).unwrap(), x);
    }

    #[test]
    fn ones_kernel_on_constant_image() {
        let x = Tensor::<f64>::full([1, 1, 6, 6], 0.25);
        let w = Tensor::full([1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.shape(), [1, 1, 4, 4]);
        assert!(y.data().iter().all(|&v| v == 9.0 * 0.25));
    }

    #[test]
    fn output_size_formula() {
        let x = ramp([1, 3, 9, 8]);
        let w = ramp([4, 3, 4, 4]);
        let y = conv2d(&x, &w, None, 2, 1).unwrap();
        assert_eq!(y.shape(), [1, 4, (9 + 2 - 4) / 2 + 1, (8 + 2 - 4) / 2 + 1]);
        let t = conv_transpose2d(&ramp([1, 3, 5, 4]), &ramp([3, 2, 3, 3]), None, 2).unwrap();
        assert_eq!(t.shape(), [1, 2, 4 * 2 + 3, 3 * 2 + 3]);
    }

    #[test]
    fn nonoverlapping_scatter() {
        let x = Tensor::<f64>::full([1, 1, 2, 2], 1.0);
        let w = Tensor::full([1, 1, 2, 2], 1.0);
        let y = conv_transpose2d(&x, &w, None, 2).unwrap();
        assert_eq!(y.shape(), [1, 1, 4, 4]);
        assert!(y.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn bias_is_broadcast_per_channel() {
        let x = Tensor::<f64>::zeros([1, 1, 3, 3]);
        let w = Tensor::zeros([2, 1, 1, 1]);
        let b = Tensor::new([1, 2, 1, 1], vec![0.5, -1.0]).unwrap();
        let y = conv2d(&x, &w, Some(&b), 1, 0).unwrap();
        assert_eq!(&y.data()[..9], &[0.5; 9]);
        assert_eq!(&y.data()[9..], &[-1.0; 9]);
    }

    #[test]
    fn shape_errors() {
        let x = ramp([1, 2, 5, 5]);
        assert!(conv2d(&x, &ramp([1, 3, 3, 3]), None, 1, 1).is_err());
        assert!(conv2d(&x, &ramp([1, 2, 3, 2]), None, 1, 1).is_err());
        assert!(conv2d(&x, &ramp([1, 2, 3, 3]), None, 0, 1).is_err());
        assert!(conv2d(&x, &ramp([1, 2, 9, 9]), None, 1, 1).is_err());
        assert!(conv2d(&x, &ramp([4, 2, 3, 3]), Some(&ramp([1, 3, 1, 1])), 1, 1).is_err());
        assert!(conv_transpose2d(&x, &ramp([3, 1, 2, 2]), None, 2).is_err());
        assert!(conv_transpose2d(&x, &ramp([2, 1, 2, 2]), None, 0).is_err());
    }
}
