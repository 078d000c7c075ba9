use num_traits::Float;

use super::kernels::{self, ConvGeom};
use crate::error::{Error, Result};

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Float> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{shape:?} ({n} values)"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Stand-alone 2-D convolution (cross-correlation, no padding).
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T = f32> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[out][in][ky][kx]`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Float> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel,
            stride,
            weight: vec![T::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let &[c, h, w] = input.shape() else {
            return Err(Error::ShapeMismatch {
                expected: "3-D input".into(),
                actual: format!("{:?}", input.shape()),
            });
        };
        if c != self.in_channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{} input channels", self.in_channels),
                actual: format!("{c}"),
            });
        }
        if h < self.kernel || w < self.kernel {
            return Err(Error::KernelTooLarge {
                input: input.shape().to_vec(),
                kernel: self.kernel,
            });
        }
        let g = ConvGeom {
            in_c: c,
            in_h: h,
            in_w: w,
            k: self.kernel,
            stride: self.stride,
            out_c: self.out_channels,
        };
        let mut col = vec![T::zero(); g.patch() * g.positions()];
        kernels::im2col(&g, input.data(), 1, g.in_h * g.in_w, 0, &mut col);
        let mut out = Tensor::zeros(vec![g.out_c, g.out_h(), g.out_w()]);
        kernels::conv_forward(&g, &self.weight, &self.bias, &col, out.data_mut());
        Ok(out)
    }
}
