//! Sparse autoencoder layers and greedy layer-wise stacking.
//!
//! One layer maps `x ∈ R^v` to a hidden code `a = σ(W1·x + b1) ∈ (0,1)^h`
//! and back to `x̂ = σ(W2·a + b2)`. Training minimizes
//!
//! ```text
//! J = (1/m)·Σᵢ ‖x̂⁽ⁱ⁾ − x⁽ⁱ⁾‖² + λ·(ΣW1² + ΣW2²) + β·Σⱼ KL(ρ ‖ ρ̂ⱼ)
//! ```
//!
//! where `ρ̂ⱼ` is the mean activation of hidden unit `j` over the batch and
//! `KL` is the divergence between Bernoulli variables with means `ρ` and `ρ̂ⱼ`.
//! Biases are not decayed.
//!
//! Batches are matrices with one sample per row.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::optim::{self, DescentError, DescentOptions, DescentReport, Direction, Objective};
use crate::orientation::{decode_features, OrientationError, OrientationField};

/// `ρ̂` is clamped into `[RHO_HAT_FLOOR, 1 − RHO_HAT_FLOOR]` before the KL term.
pub const RHO_HAT_FLOOR: f64 = 1e-8;
/// Features in `[−1, 1]` are mapped to `[INPUT_LO, INPUT_HI]` before the first layer.
pub const INPUT_LO: f64 = 0.1;
pub const INPUT_HI: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SaeError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("empty training data")]
    EmptyData,
    #[error("invalid hyperparameter: {0}")]
    Hyper(String),
    #[error("finite-difference step must be positive and finite, got {0}")]
    Step(f64),
    #[error("layer sizes must be non-empty and positive")]
    LayerSizes,
    #[error("training layer {layer} diverged at iteration {iteration}")]
    Diverged { layer: usize, iteration: usize },
    #[error(transparent)]
    Orientation(#[from] OrientationError),
}

/// Encoder and decoder weights of one autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `hidden × visible`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `visible × hidden`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(visible: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, visible)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((visible, hidden)),
            b2: Array1::zeros(visible),
        }
    }

    /// Weights uniform in `±√6/√(visible+hidden+1)`, biases zero.
    pub fn random(visible: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let r = 6f64.sqrt() / ((visible + hidden + 1) as f64).sqrt();
        let mut p = Self::zeros(visible, hidden);
        p.w1.mapv_inplace(|_| rng.random_range(-r..=r));
        p.w2.mapv_inplace(|_| rng.random_range(-r..=r));
        p
    }

    pub fn visible(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn num_params(&self) -> usize {
        2 * self.visible() * self.hidden() + self.visible() + self.hidden()
    }

    /// Checks that the four arrays agree on `(visible, hidden)` and are finite.
    pub fn check(&self) -> Result<(), SaeError> {
        let (h, v) = self.w1.dim();
        let dims = [
            (self.b1.len(), h),
            (self.w2.nrows(), v),
            (self.w2.ncols(), h),
            (self.b2.len(), v),
        ];
        if let Some(&(found, expected)) = dims.iter().find(|(a, b)| a != b) {
            return Err(SaeError::Dimension { expected, found });
        }
        let finite = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2);
        if finite.into_iter().any(|x| !x.is_finite()) {
            return Err(SaeError::NonFinite);
        }
        Ok(())
    }

    /// Flattens as `W1, b1, W2, b2`, each row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out
    }

    pub fn from_flat(visible: usize, hidden: usize, flat: &[f64]) -> Self {
        let vh = visible * hidden;
        assert_eq!(flat.len(), 2 * vh + visible + hidden, "flat parameter length");
        let (w1, rest) = flat.split_at(vh);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, b2) = rest.split_at(vh);
        Self {
            w1: Array2::from_shape_vec((hidden, visible), w1.to_vec()).unwrap(),
            b1: Array1::from(b1.to_vec()),
            w2: Array2::from_shape_vec((visible, hidden), w2.to_vec()).unwrap(),
            b2: Array1::from(b2.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaeHyper {
    /// Weight decay.
    pub lambda: f64,
    /// Sparsity weight.
    pub beta: f64,
    /// Target mean activation.
    pub rho: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for SaeHyper {
    fn default() -> Self {
        Self {
            lambda: 0.003,
            beta: 3.0,
            rho: 0.05,
            max_iters: 400,
            grad_tol: 1e-4,
        }
    }
}

impl SaeHyper {
    pub fn check(&self) -> Result<(), SaeError> {
        let bad = |msg: String| Err(SaeError::Hyper(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be >= 0", self.lambda));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta {} must be >= 0", self.beta));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho {} must lie in (0, 1)", self.rho));
        }
        if !(self.grad_tol > 0.0) {
            return bad(format!("grad_tol {} must be > 0", self.grad_tol));
        }
        Ok(())
    }
}

/// Logistic function, stable for large `|z|`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_vec(z: &[f64]) -> Vec<f64> {
    z.iter().copied().map(sigmoid).collect()
}

/// KL divergence between Bernoulli(ρ) and Bernoulli(q).
pub fn kl_divergence(rho: f64, q: f64) -> f64 {
    rho * (rho / q).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - q)).ln()
}

/// The three summands of the layer objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub reconstruction: f64,
    pub weight_decay: f64,
    pub sparsity: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.weight_decay + self.sparsity
    }
}

fn check_batch(p: &LayerParams, batch: ArrayView2<f64>) -> Result<(), SaeError> {
    p.check()?;
    if batch.nrows() == 0 {
        return Err(SaeError::EmptyData);
    }
    if batch.ncols() != p.visible() {
        return Err(SaeError::Dimension {
            expected: p.visible(),
            found: batch.ncols(),
        });
    }
    if batch.iter().any(|x| !x.is_finite()) {
        return Err(SaeError::NonFinite);
    }
    Ok(())
}

/// `σ(X·Wᵀ + b)` for a row-per-sample batch.
fn affine_sigmoid(x: ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut z = x.dot(&w.t());
    z += b;
    z.mapv_inplace(sigmoid);
    z
}

struct Forward {
    hidden: Array2<f64>,
    output: Array2<f64>,
    rho_hat: Array1<f64>,
}

fn forward(p: &LayerParams, batch: ArrayView2<f64>) -> Forward {
    let hidden = affine_sigmoid(batch, &p.w1, &p.b1);
    let output = affine_sigmoid(hidden.view(), &p.w2, &p.b2);
    let rho_hat = hidden.mean_axis(Axis(0)).expect("non-empty batch");
    Forward {
        hidden,
        output,
        rho_hat,
    }
}

fn clamp_rho_hat(q: f64) -> f64 {
    q.clamp(RHO_HAT_FLOOR, 1.0 - RHO_HAT_FLOOR)
}

fn terms_from(p: &LayerParams, batch: ArrayView2<f64>, fwd: &Forward, h: &SaeHyper) -> CostTerms {
    let m = batch.nrows() as f64;
    let mut sq = 0.0;
    Zip::from(&fwd.output).and(&batch).for_each(|&o, &x| sq += (o - x) * (o - x));
    let decay = p.w1.iter().chain(&p.w2).map(|w| w * w).sum::<f64>();
    let kl = fwd
        .rho_hat
        .iter()
        .map(|&q| kl_divergence(h.rho, clamp_rho_hat(q)))
        .sum::<f64>();
    CostTerms {
        reconstruction: sq / m,
        weight_decay: h.lambda * decay,
        sparsity: h.beta * kl,
    }
}

/// Evaluates each objective term separately.
pub fn sae_cost_terms(
    p: &LayerParams,
    batch: ArrayView2<f64>,
    h: &SaeHyper,
) -> Result<CostTerms, SaeError> {
    check_batch(p, batch)?;
    let fwd = forward(p, batch);
    Ok(terms_from(p, batch, &fwd, h))
}

/// Objective value and its exact gradient, shaped like the parameters.
pub fn sae_cost_grad(
    p: &LayerParams,
    batch: ArrayView2<f64>,
    h: &SaeHyper,
) -> Result<(f64, LayerParams), SaeError> {
    check_batch(p, batch)?;
    Ok(cost_grad_unchecked(p, batch, h))
}

fn cost_grad_unchecked(p: &LayerParams, batch: ArrayView2<f64>, h: &SaeHyper) -> (f64, LayerParams) {
    let m = batch.nrows() as f64;
    let fwd = forward(p, batch);
    let cost = terms_from(p, batch, &fwd, h).total();

    // Output deltas: ∂J/∂z3 = (2/m)(x̂ − x)·x̂(1 − x̂)
    let mut d3 = &fwd.output - &batch;
    Zip::from(&mut d3)
        .and(&fwd.output)
        .for_each(|d, &o| *d *= (2.0 / m) * o * (1.0 - o));

    // Sparsity contribution per hidden unit, zero where the clamp is active.
    let sparse: Array1<f64> = fwd.rho_hat.mapv(|q| {
        if !(RHO_HAT_FLOOR..=1.0 - RHO_HAT_FLOOR).contains(&q) {
            0.0
        } else {
            h.beta * (-h.rho / q + (1.0 - h.rho) / (1.0 - q)) / m
        }
    });
    let mut d2 = d3.dot(&p.w2);
    d2 += &sparse;
    Zip::from(&mut d2)
        .and(&fwd.hidden)
        .for_each(|d, &a| *d *= a * (1.0 - a));

    let mut gw2 = d3.t().dot(&fwd.hidden);
    gw2.scaled_add(2.0 * h.lambda, &p.w2);
    let mut gw1 = d2.t().dot(&batch);
    gw1.scaled_add(2.0 * h.lambda, &p.w1);
    let grads = LayerParams {
        w1: gw1,
        b1: d2.sum_axis(Axis(0)),
        w2: gw2,
        b2: d3.sum_axis(Axis(0)),
    };
    (cost, grads)
}

struct LayerObjective<'a> {
    batch: ArrayView2<'a, f64>,
    visible: usize,
    hidden: usize,
    hyper: SaeHyper,
}

impl Objective for LayerObjective<'_> {
    fn cost(&self, x: &[f64]) -> f64 {
        let p = LayerParams::from_flat(self.visible, self.hidden, x);
        let fwd = forward(&p, self.batch);
        terms_from(&p, self.batch, &fwd, &self.hyper).total()
    }

    fn cost_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let p = LayerParams::from_flat(self.visible, self.hidden, x);
        let (c, g) = cost_grad_unchecked(&p, self.batch, &self.hyper);
        (c, g.to_flat())
    }
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences `(J(w+ε) − J(w−ε)) / 2ε`, using
/// `|a − n| / max(1e-8, |a| + |n|)` per parameter.
pub fn gradient_check(
    p: &LayerParams,
    batch: ArrayView2<f64>,
    h: &SaeHyper,
    eps: f64,
) -> Result<f64, SaeError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SaeError::Step(eps));
    }
    let (_, grads) = sae_cost_grad(p, batch, h)?;
    let analytic = grads.to_flat();
    let obj = LayerObjective {
        batch,
        visible: p.visible(),
        hidden: p.hidden(),
        hyper: *h,
    };
    let mut x = p.to_flat();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = obj.cost(&x);
        x[i] = orig - eps;
        let minus = obj.cost(&x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8));
    }
    Ok(worst)
}

const DIRECTION: Direction = Direction::Lbfgs { memory: 10 };

/// Trains one sparse autoencoder on a row-per-sample batch.
///
/// The returned trace starts with the cost at initialization.
pub fn train_layer(
    data: ArrayView2<f64>,
    hidden: usize,
    h: &SaeHyper,
    seed: u64,
) -> Result<(LayerParams, DescentReport), SaeError> {
    h.check()?;
    if data.nrows() == 0 {
        return Err(SaeError::EmptyData);
    }
    if hidden == 0 {
        return Err(SaeError::LayerSizes);
    }
    let visible = data.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = LayerParams::random(visible, hidden, &mut rng);
    check_batch(&init, data)?;
    let obj = LayerObjective {
        batch: data,
        visible,
        hidden,
        hyper: *h,
    };
    let opts = DescentOptions {
        max_iters: h.max_iters,
        grad_tol: h.grad_tol,
        direction: DIRECTION,
        ..DescentOptions::default()
    };
    let (x, report) = optim::minimize(&obj, init.to_flat(), &opts).map_err(|e| match e {
        DescentError::Diverged { iteration } => SaeError::Diverged { layer: 0, iteration },
    })?;
    Ok((LayerParams::from_flat(visible, hidden, &x), report))
}

/// Hidden activation `σ(W1·x + b1)` of one layer.
pub fn encode(layer: &LayerParams, x: &[f64]) -> Result<Vec<f64>, SaeError> {
    if x.len() != layer.visible() {
        return Err(SaeError::Dimension {
            expected: layer.visible(),
            found: x.len(),
        });
    }
    let z = layer.w1.dot(&ArrayView1::from(x)) + &layer.b1;
    Ok(z.iter().copied().map(sigmoid).collect())
}

/// Decoder half `σ(W2·a + b2)` of one layer.
pub fn decode(layer: &LayerParams, code: &[f64]) -> Result<Vec<f64>, SaeError> {
    if code.len() != layer.hidden() {
        return Err(SaeError::Dimension {
            expected: layer.hidden(),
            found: code.len(),
        });
    }
    let z = layer.w2.dot(&ArrayView1::from(code)) + &layer.b2;
    Ok(z.iter().copied().map(sigmoid).collect())
}

/// Hidden activations for a whole batch.
pub fn encode_batch(layer: &LayerParams, batch: ArrayView2<f64>) -> Result<Array2<f64>, SaeError> {
    if batch.ncols() != layer.visible() {
        return Err(SaeError::Dimension {
            expected: layer.visible(),
            found: batch.ncols(),
        });
    }
    Ok(affine_sigmoid(batch, &layer.w1, &layer.b1))
}

/// Mean hidden activation per unit over a batch.
pub fn mean_activation(layer: &LayerParams, batch: ArrayView2<f64>) -> Result<Array1<f64>, SaeError> {
    check_batch(layer, batch)?;
    Ok(forward(layer, batch).rho_hat)
}

/// `[−1, 1] → [0.1, 0.9]`
pub fn to_unit_range(x: f64) -> f64 {
    (x + 1.0) * 0.4 + INPUT_LO
}

/// `[0.1, 0.9] → [−1, 1]`
pub fn from_unit_range(y: f64) -> f64 {
    (y - INPUT_LO) / 0.4 - 1.0
}

/// Trained autoencoder layers, applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedEncoder {
    pub layers: Vec<LayerParams>,
    pub hypers: Vec<SaeHyper>,
}

impl StackedEncoder {
    pub fn new(layers: Vec<LayerParams>, hypers: Vec<SaeHyper>) -> Result<Self, SaeError> {
        if layers.len() != hypers.len() {
            return Err(SaeError::Dimension {
                expected: layers.len(),
                found: hypers.len(),
            });
        }
        for l in &layers {
            l.check()?;
        }
        for pair in layers.windows(2) {
            if pair[1].visible() != pair[0].hidden() {
                return Err(SaeError::Dimension {
                    expected: pair[0].hidden(),
                    found: pair[1].visible(),
                });
            }
        }
        Ok(Self { layers, hypers })
    }

    /// A stack with no layers; encoding only applies the input range map.
    pub fn empty() -> Self {
        Self {
            layers: Vec::new(),
            hypers: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(LayerParams::visible)
    }

    pub fn code_dim(&self) -> Option<usize> {
        self.layers.last().map(LayerParams::hidden)
    }

    /// Top-level code for a feature vector with entries in `[−1, 1]`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, SaeError> {
        let mut a: Vec<f64> = x.iter().copied().map(to_unit_range).collect();
        for layer in &self.layers {
            a = encode(layer, &a)?;
        }
        Ok(a)
    }

    /// Top-level codes for a row-per-sample feature batch.
    pub fn encode_batch(&self, features: ArrayView2<f64>) -> Result<Array2<f64>, SaeError> {
        let mut a = features.mapv(to_unit_range);
        for layer in &self.layers {
            a = encode_batch(layer, a.view())?;
        }
        Ok(a)
    }

    /// Encodes through every layer, decodes back through each decoder in
    /// reverse, and maps the result back to `[−1, 1]`.
    pub fn reconstruct_features(&self, x: &[f64]) -> Result<Vec<f64>, SaeError> {
        let mut a = self.encode(x)?;
        for layer in self.layers.iter().rev() {
            a = decode(layer, &a)?;
        }
        Ok(a.into_iter().map(from_unit_range).collect())
    }
}

/// Greedy layer-wise training: layer `k` is trained on the codes of layers `1..k`.
///
/// `features` holds double-angle vectors in `[−1, 1]`, one per row; they are
/// mapped into `[0.1, 0.9]` before the first layer. Layer `k` uses seed
/// `seed + k`.
pub fn train_stack(
    features: ArrayView2<f64>,
    layer_sizes: &[usize],
    hypers: &[SaeHyper],
    seed: u64,
) -> Result<StackedEncoder, SaeError> {
    if features.nrows() == 0 {
        return Err(SaeError::EmptyData);
    }
    if layer_sizes.is_empty() || layer_sizes.contains(&0) {
        return Err(SaeError::LayerSizes);
    }
    if hypers.len() != layer_sizes.len() {
        return Err(SaeError::Dimension {
            expected: layer_sizes.len(),
            found: hypers.len(),
        });
    }
    let mut input = features.mapv(to_unit_range);
    let mut layers = Vec::with_capacity(layer_sizes.len());
    for (k, (&hidden, h)) in layer_sizes.iter().zip(hypers).enumerate() {
        let (layer, _) = train_layer(input.view(), hidden, h, seed.wrapping_add(k as u64))
            .map_err(|e| match e {
                SaeError::Diverged { iteration, .. } => SaeError::Diverged { layer: k, iteration },
                other => other,
            })?;
        input = encode_batch(&layer, input.view())?;
        layers.push(layer);
    }
    StackedEncoder::new(layers, hypers.to_vec())
}

/// Reconstructed feature vector and the orientation field it decodes to.
pub fn reconstruct(
    enc: &StackedEncoder,
    x: &[f64],
    rows: usize,
    cols: usize,
) -> Result<(Vec<f64>, OrientationField), SaeError> {
    if x.len() != 2 * rows * cols {
        return Err(SaeError::Dimension {
            expected: 2 * rows * cols,
            found: x.len(),
        });
    }
    let xhat = enc.reconstruct_features(x)?;
    let field = decode_features(&xhat, rows, cols)?;
    Ok((xhat, field))
}
