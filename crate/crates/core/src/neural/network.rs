//! The convolutional dueling Q-network.
//!
//! ```text
//! input (3, H, W)
//!   conv 16 @ 4x4 stride 2 -> ELU
//!   conv 32 @ 2x2 stride 1 -> ELU -> flatten
//!   dense 128 -> ELU
//!   dense 64  -> ELU
//!   value 64 -> 1,  advantage 64 -> |A|
//!   Q = V + A - mean(A)
//! ```
//!
//! All parameters live in one flat vector so the optimizer, the target
//! update and the checkpoint code treat them uniformly. Block order:
//! conv1 w/b, conv2 w/b, fc1 w/b, fc2 w/b, value w/b, advantage w/b.
//! Convolution weights are `[out][in][ky][kx]`, dense weights `[in][out]`.

use std::ops::Range;

use num_traits::Float;

use super::kernels::{self, ConvGeom};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sim::ScenarioTag;

pub const BLOCK_NAMES: [&str; 12] = [
    "conv1.w", "conv1.b", "conv2.w", "conv2.b", "fc1.w", "fc1.b", "fc2.w", "fc2.b", "value.w",
    "value.b", "adv.w", "adv.b",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arch {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub conv1: (usize, usize, usize),
    pub conv2: (usize, usize, usize),
    pub fc1: usize,
    pub fc2: usize,
    pub actions: usize,
}

impl Arch {
    /// Default layer sizes for a `(channels, height, width)` input.
    pub fn new(channels: usize, height: usize, width: usize, actions: usize) -> Result<Self> {
        let arch = Self {
            channels,
            height,
            width,
            conv1: (16, 4, 2),
            conv2: (32, 2, 1),
            fc1: 128,
            fc2: 64,
            actions,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn for_scenario(tag: ScenarioTag) -> Self {
        let (c, h, w) = crate::encoder::state_shape(tag);
        Self::new(c, h, w, tag.phase_count()).expect("built-in scenarios fit the network")
    }

    fn validate(&self) -> Result<()> {
        let (_, k1, s1) = self.conv1;
        if self.height < k1 || self.width < k1 || s1 == 0 {
            return Err(Error::KernelTooLarge {
                input: vec![self.channels, self.height, self.width],
                kernel: k1,
            });
        }
        let g1 = self.geom1();
        let (_, k2, s2) = self.conv2;
        if g1.out_h() < k2 || g1.out_w() < k2 || s2 == 0 {
            return Err(Error::KernelTooLarge {
                input: vec![g1.out_c, g1.out_h(), g1.out_w()],
                kernel: k2,
            });
        }
        if self.actions == 0 {
            return Err(Error::Config("network needs at least one action".into()));
        }
        Ok(())
    }

    pub fn geom1(&self) -> ConvGeom {
        ConvGeom {
            in_c: self.channels,
            in_h: self.height,
            in_w: self.width,
            k: self.conv1.1,
            stride: self.conv1.2,
            out_c: self.conv1.0,
        }
    }

    pub fn geom2(&self) -> ConvGeom {
        let g1 = self.geom1();
        ConvGeom {
            in_c: g1.out_c,
            in_h: g1.out_h(),
            in_w: g1.out_w(),
            k: self.conv2.1,
            stride: self.conv2.2,
            out_c: self.conv2.0,
        }
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn flat_len(&self) -> usize {
        self.geom2().output_len()
    }

    pub fn block_sizes(&self) -> [usize; 12] {
        let (g1, g2) = (self.geom1(), self.geom2());
        let flat = self.flat_len();
        [
            g1.weight_len(),
            g1.out_c,
            g2.weight_len(),
            g2.out_c,
            flat * self.fc1,
            self.fc1,
            self.fc1 * self.fc2,
            self.fc2,
            self.fc2,
            1,
            self.fc2 * self.actions,
            self.actions,
        ]
    }

    pub fn blocks(&self) -> [Range<usize>; 12] {
        let sizes = self.block_sizes();
        let mut start = 0;
        sizes.map(|n| {
            let r = start..start + n;
            start += n;
            r
        })
    }

    pub fn param_count(&self) -> usize {
        self.block_sizes().iter().sum()
    }

    /// Fan-in of the layer owning weight block `block`.
    fn fan_in(&self, block: usize) -> usize {
        match block / 2 {
            0 => self.geom1().patch(),
            1 => self.geom2().patch(),
            2 => self.flat_len(),
            3 => self.fc1,
            _ => self.fc2,
        }
    }
}

/// Per-batch activations kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct Workspace<T> {
    batch: usize,
    col1: Vec<T>,
    a1: Vec<T>,
    col2: Vec<T>,
    a2: Vec<T>,
    // `a2` regrouped sample-major for the dense layers
    flat: Vec<T>,
    h1: Vec<T>,
    h2: Vec<T>,
    value: Vec<T>,
    adv: Vec<T>,
    q: Vec<T>,
    // backward scratch
    d_a1: Vec<T>,
    d_col2: Vec<T>,
    d_a2: Vec<T>,
    d_flat: Vec<T>,
    d_h1: Vec<T>,
    d_h2: Vec<T>,
    d_v: Vec<T>,
    d_adv: Vec<T>,
}

impl<T: Float> Workspace<T> {
    pub fn new() -> Self {
        Self {
            batch: 0,
            col1: Vec::new(),
            a1: Vec::new(),
            col2: Vec::new(),
            a2: Vec::new(),
            flat: Vec::new(),
            h1: Vec::new(),
            h2: Vec::new(),
            value: Vec::new(),
            adv: Vec::new(),
            q: Vec::new(),
            d_a1: Vec::new(),
            d_col2: Vec::new(),
            d_a2: Vec::new(),
            d_flat: Vec::new(),
            d_h1: Vec::new(),
            d_h2: Vec::new(),
            d_v: Vec::new(),
            d_adv: Vec::new(),
        }
    }

    fn prepare(&mut self, arch: &Arch, batch: usize) {
        let (g1, g2) = (arch.geom1(), arch.geom2());
        let z = T::zero();
        self.batch = batch;
        self.col1.resize(batch * g1.patch() * g1.positions(), z);
        self.a1.resize(batch * g1.output_len(), z);
        self.col2.resize(batch * g2.patch() * g2.positions(), z);
        self.a2.resize(batch * g2.output_len(), z);
        self.flat.resize(batch * g2.output_len(), z);
        self.h1.resize(batch * arch.fc1, z);
        self.h2.resize(batch * arch.fc2, z);
        self.value.resize(batch, z);
        self.adv.resize(batch * arch.actions, z);
        self.q.resize(batch * arch.actions, z);
        self.d_a1.resize(batch * g1.output_len(), z);
        self.d_col2.resize(batch * g2.patch() * g2.positions(), z);
        self.d_a2.resize(batch * g2.output_len(), z);
        self.d_flat.resize(batch * g2.output_len(), z);
        self.d_h1.resize(batch * arch.fc1, z);
        self.d_h2.resize(batch * arch.fc2, z);
        self.d_v.resize(batch, z);
        self.d_adv.resize(batch * arch.actions, z);
    }

    /// Q-values of the last forward pass, `[batch][action]`.
    pub fn q(&self) -> &[T] {
        &self.q
    }

    pub fn value(&self) -> &[T] {
        &self.value
    }

    pub fn advantage(&self) -> &[T] {
        &self.adv
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// The four ELU outputs of the trunk (conv1, conv2, fc1, fc2). The sign of
    /// each entry is the sign of its pre-activation.
    pub fn hidden(&self) -> [&[T]; 4] {
        [&self.a1, &self.a2, &self.h1, &self.h2]
    }
}

/// Output of a single-state forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct QOutput<T> {
    pub value: T,
    pub advantage: Vec<T>,
    pub q: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork<T = f32> {
    arch: Arch,
    params: Vec<T>,
}

fn elu_inplace<T: Float>(xs: &mut [T]) {
    for x in xs {
        *x = kernels::elu(*x);
    }
}

fn elu_backprop<T: Float>(grad: &mut [T], out: &[T]) {
    for (g, &y) in grad.iter_mut().zip(out) {
        *g = *g * kernels::elu_grad_from_output(y);
    }
}

impl<T: Float> QNetwork<T> {
    /// He-uniform weights (`±sqrt(6 / fan_in)`), output heads scaled by 1/100,
    /// zero biases.
    pub fn new(arch: Arch, rng: &mut RngStream) -> Self {
        let mut params = vec![T::zero(); arch.param_count()];
        for (b, range) in arch.blocks().into_iter().enumerate() {
            if b % 2 == 1 {
                continue;
            }
            let mut limit = (6.0 / arch.fan_in(b) as f64).sqrt();
            if b >= 8 {
                limit /= 100.0;
            }
            for p in &mut params[range] {
                *p = T::from(rng.uniform_range(-limit, limit)).expect("finite init");
            }
        }
        Self { arch, params }
    }

    pub fn from_params(arch: Arch, params: Vec<T>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", arch.param_count()),
                actual: format!("{}", params.len()),
            });
        }
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn block(&self, i: usize) -> &[T] {
        &self.params[self.arch.blocks()[i].clone()]
    }

    /// Converts to another float width (used for high-precision gradient checks).
    pub fn cast<U: Float>(&self) -> QNetwork<U> {
        QNetwork {
            arch: self.arch,
            params: self
                .params
                .iter()
                .map(|&p| U::from(p).expect("representable"))
                .collect(),
        }
    }

    /// Batched forward pass; `input` holds `batch` states back to back.
    /// Returns the Q-values `[batch][action]`.
    pub fn forward<'w>(&self, input: &[T], batch: usize, ws: &'w mut Workspace<T>) -> Result<&'w [T]> {
        let arch = &self.arch;
        let n_in = arch.input_len();
        if input.len() != batch * n_in {
            return Err(Error::ShapeMismatch {
                expected: format!("{batch} x {n_in} inputs"),
                actual: format!("{}", input.len()),
            });
        }
        if batch == 0 {
            return Err(Error::EmptyBatch);
        }
        ws.prepare(arch, batch);
        let [c1w, c1b, c2w, c2b, f1w, f1b, f2w, f2b, vw, vb, aw, ab] = arch.blocks();
        let p = &self.params;
        let (g1, g2) = (arch.geom1(), arch.geom2());
        let n_a2 = g2.output_len();
        let n_act = arch.actions;
        let inv_a = T::one() / T::from(n_act).expect("small");

        // conv activations are kept as [channel][sample][position]
        kernels::im2col(&g1, input, batch, g1.in_h * g1.in_w, n_in, &mut ws.col1);
        kernels::conv_forward(&g1, &p[c1w], &p[c1b], &ws.col1, &mut ws.a1);
        elu_inplace(&mut ws.a1);
        let p1 = g1.positions();
        kernels::im2col(&g2, &ws.a1, batch, batch * p1, p1, &mut ws.col2);
        kernels::conv_forward(&g2, &p[c2w], &p[c2b], &ws.col2, &mut ws.a2);
        elu_inplace(&mut ws.a2);
        let p2 = g2.positions();
        for c in 0..g2.out_c {
            for b in 0..batch {
                let src = &ws.a2[(c * batch + b) * p2..(c * batch + b + 1) * p2];
                ws.flat[b * n_a2 + c * p2..b * n_a2 + (c + 1) * p2].copy_from_slice(src);
            }
        }

        kernels::dense_forward_batch(&p[f1w], &p[f1b], &ws.flat, &mut ws.h1, batch);
        elu_inplace(&mut ws.h1);
        kernels::dense_forward_batch(&p[f2w], &p[f2b], &ws.h1, &mut ws.h2, batch);
        elu_inplace(&mut ws.h2);
        kernels::dense_forward_batch(&p[vw], &p[vb], &ws.h2, &mut ws.value, batch);
        kernels::dense_forward_batch(&p[aw], &p[ab], &ws.h2, &mut ws.adv, batch);

        for b in 0..batch {
            let adv = &ws.adv[b * n_act..(b + 1) * n_act];
            let mean = adv.iter().fold(T::zero(), |s, &a| s + a) * inv_a;
            let v = ws.value[b];
            for (q, &a) in ws.q[b * n_act..(b + 1) * n_act].iter_mut().zip(adv) {
                *q = v + (a - mean);
            }
        }
        Ok(&ws.q)
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the Q-values of the last forward pass is `dq` (`[batch][action]`).
    pub fn backward(&self, ws: &mut Workspace<T>, dq: &[T], grads: &mut [T]) {
        let arch = &self.arch;
        let batch = ws.batch;
        let n_act = arch.actions;
        assert_eq!(dq.len(), batch * n_act, "dq must match the last forward batch");
        assert_eq!(grads.len(), self.params.len());
        let [c1w, _, c2w, _, f1w, _, f2w, _, vw, _, aw, _] = arch.blocks();
        let p = &self.params;
        let (g1, g2) = (arch.geom1(), arch.geom2());
        let n_a2 = g2.output_len();
        let inv_a = T::one() / T::from(n_act).expect("small");

        // split the gradient buffer into its 12 blocks
        let mut rest = &mut grads[..];
        let mut gb: Vec<&mut [T]> = Vec::with_capacity(12);
        for size in arch.block_sizes() {
            let (head, tail) = rest.split_at_mut(size);
            gb.push(head);
            rest = tail;
        }
        let [d_c1w, d_c1b, d_c2w, d_c2b, d_f1w, d_f1b, d_f2w, d_f2b, d_vw, d_vb, d_aw, d_ab]: [&mut [T]; 12] =
            gb.try_into().map_err(|_| ()).expect("twelve blocks");

        for b in 0..batch {
            let g = &dq[b * n_act..(b + 1) * n_act];
            let sum = g.iter().fold(T::zero(), |s, &x| s + x);
            ws.d_v[b] = sum;
            for (d, &gi) in ws.d_adv[b * n_act..(b + 1) * n_act].iter_mut().zip(g) {
                *d = gi - sum * inv_a;
            }
        }

        ws.d_h2.fill(T::zero());
        kernels::dense_backward_batch(&p[vw], &ws.h2, &ws.d_v, d_vw, d_vb, Some(&mut ws.d_h2), batch);
        kernels::dense_backward_batch(&p[aw], &ws.h2, &ws.d_adv, d_aw, d_ab, Some(&mut ws.d_h2), batch);
        elu_backprop(&mut ws.d_h2, &ws.h2);

        ws.d_h1.fill(T::zero());
        kernels::dense_backward_batch(&p[f2w], &ws.h1, &ws.d_h2, d_f2w, d_f2b, Some(&mut ws.d_h1), batch);
        elu_backprop(&mut ws.d_h1, &ws.h1);

        ws.d_flat.fill(T::zero());
        kernels::dense_backward_batch(&p[f1w], &ws.flat, &ws.d_h1, d_f1w, d_f1b, Some(&mut ws.d_flat), batch);
        let p2 = g2.positions();
        for c in 0..g2.out_c {
            for b in 0..batch {
                let src = &ws.d_flat[b * n_a2 + c * p2..b * n_a2 + (c + 1) * p2];
                ws.d_a2[(c * batch + b) * p2..(c * batch + b + 1) * p2].copy_from_slice(src);
            }
        }
        elu_backprop(&mut ws.d_a2, &ws.a2);

        kernels::conv_backward(&g2, &p[c2w], &ws.col2, &ws.d_a2, d_c2w, d_c2b, Some(&mut ws.d_col2));
        let p1 = g1.positions();
        ws.d_a1.fill(T::zero());
        kernels::col2im_add(&g2, &ws.d_col2, batch, batch * p1, p1, &mut ws.d_a1);
        elu_backprop(&mut ws.d_a1, &ws.a1);
        kernels::conv_backward(&g1, &p[c1w], &ws.col1, &ws.d_a1, d_c1w, d_c1b, None);
    }

    /// Value, advantages and Q-values of one state.
    pub fn evaluate(&self, state: &[T]) -> Result<QOutput<T>> {
        let mut ws = Workspace::new();
        let q = self.forward(state, 1, &mut ws)?.to_vec();
        Ok(QOutput {
            value: ws.value[0],
            advantage: ws.adv.clone(),
            q,
        })
    }

    pub fn q_values(&self, state: &[T]) -> Result<Vec<T>> {
        Ok(self.evaluate(state)?.q)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: Float>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(seed: u64) -> QNetwork<f64> {
        QNetwork::new(Arch::for_scenario(ScenarioTag::A), &mut RngStream::new(seed))
    }

    fn random_state(arch: &Arch, rng: &mut RngStream) -> Vec<f64> {
        (0..arch.input_len()).map(|_| rng.uniform()).collect()
    }

    #[test]
    fn layer_shapes_per_scenario() {
        let a = Arch::for_scenario(ScenarioTag::A);
        assert_eq!((a.geom1().out_h(), a.geom1().out_w()), (3, 9));
        assert_eq!((a.geom2().out_h(), a.geom2().out_w()), (2, 8));
        assert_eq!(a.flat_len(), 512);
        assert_eq!(Arch::for_scenario(ScenarioTag::B).flat_len(), 32 * 4 * 8);
        assert_eq!(Arch::for_scenario(ScenarioTag::C).flat_len(), 32 * 6 * 8);
        assert!(Arch::new(3, 3, 20, 2).is_err());
        assert!(Arch::new(3, 4, 4, 2).is_err());
    }

    #[test]
    fn init_bounded_and_biases_zero() {
        let n = net(1);
        assert!(n.params().iter().all(|w| w.is_finite() && w.abs() < 1.0));
        for b in (1..12).step_by(2) {
            assert!(n.block(b).iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn dueling_mean_zero() {
        let n = net(2);
        let mut rng = RngStream::new(9);
        let s = random_state(n.arch(), &mut rng);
        let out = n.evaluate(&s).unwrap();
        let mean: f64 = out.q.iter().map(|q| q - out.value).sum::<f64>() / out.q.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single() {
        let n = net(3);
        let mut rng = RngStream::new(4);
        let s1 = random_state(n.arch(), &mut rng);
        let s2 = random_state(n.arch(), &mut rng);
        let mut both = s1.clone();
        both.extend_from_slice(&s2);
        let mut ws = Workspace::new();
        let q = n.forward(&both, 2, &mut ws).unwrap().to_vec();
        assert_eq!(&q[..2], n.q_values(&s1).unwrap().as_slice());
        assert_eq!(&q[2..], n.q_values(&s2).unwrap().as_slice());
    }

    #[test]
    fn wrong_input_len() {
        let n = net(0);
        let mut ws = Workspace::new();
        assert!(n.forward(&[0.0; 10], 1, &mut ws).is_err());
    }

    #[test]
    fn zero_upstream_gradient_is_zero() {
        let n = net(5);
        let mut rng = RngStream::new(6);
        let s = random_state(n.arch(), &mut rng);
        let mut ws = Workspace::new();
        n.forward(&s, 1, &mut ws).unwrap();
        let mut g = vec![0.0; n.params().len()];
        n.backward(&mut ws, &[0.0, 0.0], &mut g);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[0.5f32, 0.5]), 0);
        assert_eq!(argmax(&[0.2f32, 0.7]), 1);
    }
}
