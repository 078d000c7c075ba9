//! Low-level loops shared by the layers. All loops run in a fixed order, so
//! results are reproducible bit for bit on any target.

use num_traits::Float;

#[inline]
pub fn axpy<T: Float>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Dot product with eight interleaved partial sums.
#[inline]
pub fn dot<T: Float>(x: &[T], y: &[T]) -> T {
    let n = x.len().min(y.len());
    let mut acc = [T::zero(); 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let xs = &x[c * 8..c * 8 + 8];
        let ys = &y[c * 8..c * 8 + 8];
        for k in 0..8 {
            acc[k] = acc[k] + xs[k] * ys[k];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..n {
        tail = tail + x[i] * y[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn elu<T: Float>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

/// ELU derivative expressed through the activation output `y`.
#[inline]
pub fn elu_grad_from_output<T: Float>(y: T) -> T {
    if y > T::zero() {
        T::one()
    } else {
        y + T::one()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub k: usize,
    pub stride: usize,
    pub out_c: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.k) / self.stride + 1
    }

    /// Output positions per channel.
    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Inputs seen by one output unit (`in_c · k · k`).
    pub fn patch(&self) -> usize {
        self.in_c * self.k * self.k
    }

    pub fn weight_len(&self) -> usize {
        self.out_c * self.patch()
    }

    pub fn input_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    pub fn output_len(&self) -> usize {
        self.out_c * self.positions()
    }
}

/// Unfolds `batch` inputs into `col[patch][sample][position]`. Element
/// `(s, c, y, x)` of the input lives at `s * batch_stride + c * chan_stride + y * in_w + x`.
pub fn im2col<T: Float>(g: &ConvGeom, input: &[T], batch: usize, chan_stride: usize, batch_stride: usize, col: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    let mut row = 0;
    for c in 0..g.in_c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                for s in 0..batch {
                    let dst = &mut col[(row * batch + s) * p..(row * batch + s + 1) * p];
                    let base = s * batch_stride + c * chan_stride + ky * g.in_w + kx;
                    for y in 0..oh {
                        let src = base + y * g.stride * g.in_w;
                        for x in 0..ow {
                            dst[y * ow + x] = input[src + x * g.stride];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: folds `dcol` back onto the input gradient (accumulating).
pub fn col2im_add<T: Float>(
    g: &ConvGeom,
    dcol: &[T],
    batch: usize,
    chan_stride: usize,
    batch_stride: usize,
    dinput: &mut [T],
) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    let mut row = 0;
    for c in 0..g.in_c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                for s in 0..batch {
                    let src = &dcol[(row * batch + s) * p..(row * batch + s + 1) * p];
                    let base = s * batch_stride + c * chan_stride + ky * g.in_w + kx;
                    for y in 0..oh {
                        let dst = base + y * g.stride * g.in_w;
                        for x in 0..ow {
                            let i = dst + x * g.stride;
                            dinput[i] = dinput[i] + src[y * ow + x];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// `out[o][p] = b[o] + Σ_k w[o][k] · col[k][p]`, where `p` runs over every
/// column of `col` (all samples of a batch).
pub fn conv_forward<T: Float>(g: &ConvGeom, w: &[T], b: &[T], col: &[T], out: &mut [T]) {
    let kk = g.patch();
    let p = col.len() / kk;
    for o in 0..g.out_c {
        let dst = &mut out[o * p..(o + 1) * p];
        dst.fill(b[o]);
        let wo = &w[o * kk..(o + 1) * kk];
        for k in 0..kk {
            axpy(wo[k], &col[k * p..(k + 1) * p], dst);
        }
    }
}

/// Accumulates weight and bias gradients; optionally writes `dcol`.
pub fn conv_backward<T: Float>(
    g: &ConvGeom,
    w: &[T],
    col: &[T],
    dout: &[T],
    dw: &mut [T],
    db: &mut [T],
    dcol: Option<&mut [T]>,
) {
    let kk = g.patch();
    let p = col.len() / kk;
    for o in 0..g.out_c {
        let d = &dout[o * p..(o + 1) * p];
        db[o] = db[o] + d.iter().fold(T::zero(), |s, &x| s + x);
        let dwo = &mut dw[o * kk..(o + 1) * kk];
        for k in 0..kk {
            dwo[k] = dwo[k] + dot(d, &col[k * p..(k + 1) * p]);
        }
    }
    if let Some(dcol) = dcol {
        dcol.fill(T::zero());
        for o in 0..g.out_c {
            let d = &dout[o * p..(o + 1) * p];
            let wo = &w[o * kk..(o + 1) * kk];
            for k in 0..kk {
                axpy(wo[k], d, &mut dcol[k * p..(k + 1) * p]);
            }
        }
    }
}

/// `out[j] = b[j] + Σ_i x[i] · w[i][j]` with `w` stored input-major.
pub fn dense_forward<T: Float>(w: &[T], b: &[T], x: &[T], out: &mut [T]) {
    let n_out = b.len();
    out.copy_from_slice(b);
    for (i, &xi) in x.iter().enumerate() {
        if xi != T::zero() {
            axpy(xi, &w[i * n_out..(i + 1) * n_out], out);
        }
    }
}

/// Accumulates `dw`, `db` and (optionally) `dx`.
pub fn dense_backward<T: Float>(
    w: &[T],
    x: &[T],
    dout: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let n_out = dout.len();
    for (dbj, &d) in db.iter_mut().zip(dout) {
        *dbj = *dbj + d;
    }
    for (i, &xi) in x.iter().enumerate() {
        if xi != T::zero() {
            axpy(xi, dout, &mut dw[i * n_out..(i + 1) * n_out]);
        }
    }
    if let Some(dx) = dx {
        for (i, dxi) in dx.iter_mut().enumerate() {
            *dxi = *dxi + dot(&w[i * n_out..(i + 1) * n_out], dout);
        }
    }
}

/// Batched [`dense_forward`]: each weight row is applied to every sample
/// while it is hot in cache. `x` is `[batch][n_in]`, `out` `[batch][n_out]`.
pub fn dense_forward_batch<T: Float>(w: &[T], b: &[T], x: &[T], out: &mut [T], batch: usize) {
    let n_out = b.len();
    let n_in = x.len() / batch;
    for row in out.chunks_exact_mut(n_out) {
        row.copy_from_slice(b);
    }
    for i in 0..n_in {
        let wi = &w[i * n_out..(i + 1) * n_out];
        for s in 0..batch {
            let xi = x[s * n_in + i];
            if xi != T::zero() {
                axpy(xi, wi, &mut out[s * n_out..(s + 1) * n_out]);
            }
        }
    }
}

/// Batched [`dense_backward`]; accumulates `dw`, `db` and (optionally) `dx`.
pub fn dense_backward_batch<T: Float>(
    w: &[T],
    x: &[T],
    dout: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
    batch: usize,
) {
    let n_out = db.len();
    let n_in = x.len() / batch;
    for d in dout.chunks_exact(n_out) {
        for (dbj, &dj) in db.iter_mut().zip(d) {
            *dbj = *dbj + dj;
        }
    }
    for i in 0..n_in {
        let dwi = &mut dw[i * n_out..(i + 1) * n_out];
        for s in 0..batch {
            let xi = x[s * n_in + i];
            if xi != T::zero() {
                axpy(xi, &dout[s * n_out..(s + 1) * n_out], dwi);
            }
        }
    }
    if let Some(dx) = dx {
        for i in 0..n_in {
            let wi = &w[i * n_out..(i + 1) * n_out];
            for s in 0..batch {
                let v = &mut dx[s * n_in + i];
                *v = *v + dot(wi, &dout[s * n_out..(s + 1) * n_out]);
            }
        }
    }
}
