//! Regularized softmax regression.
//!
//! Each class `j` owns a weight vector `θⱼ ∈ R^{n+1}` whose first entry is
//! the intercept, so with `x̃ = (1, x)`:
//!
//! ```text
//! p(y = j | x) = exp(θⱼᵀx̃) / Σₗ exp(θₗᵀx̃)
//! J(θ) = −(1/m)·Σᵢ ln p(y⁽ⁱ⁾ | x⁽ⁱ⁾) + (λ/2)·Σⱼ Σₖ θⱼₖ²
//! ```
//!
//! The penalty includes the intercepts, which keeps `J` strictly convex for
//! any `λ > 0`.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::optim::{self, DescentError, DescentOptions, DescentReport, Direction, Objective};
use crate::ClassLabel;

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_GRAD_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_ITERS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SoftmaxError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("label {label} is outside the model's {k} classes")]
    LabelOutOfRange { label: ClassLabel, k: usize },
    #[error("class {0} has no training samples")]
    MissingClass(ClassLabel),
    #[error("class count {0} must lie in 2..=4")]
    ClassCount(usize),
    #[error("regularization weight {0} must be finite and >= 0")]
    Lambda(f64),
    #[error("no training samples")]
    Empty,
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    /// `k × (n + 1)`, intercept in column 0.
    pub theta: Array2<f64>,
    pub lambda: f64,
}

impl SoftmaxModel {
    pub fn new(theta: Array2<f64>, lambda: f64) -> Result<Self, SoftmaxError> {
        let k = theta.nrows();
        if !(2..=ClassLabel::COUNT).contains(&k) {
            return Err(SoftmaxError::ClassCount(k));
        }
        if theta.ncols() == 0 {
            return Err(SoftmaxError::Dimension {
                expected: 1,
                found: 0,
            });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(SoftmaxError::Lambda(lambda));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(SoftmaxError::NonFinite);
        }
        Ok(Self { theta, lambda })
    }

    pub fn zeros(k: usize, n: usize, lambda: f64) -> Result<Self, SoftmaxError> {
        Self::new(Array2::zeros((k, n + 1)), lambda)
    }

    pub fn classes(&self) -> usize {
        self.theta.nrows()
    }

    /// Input feature length `n` (without the intercept).
    pub fn features(&self) -> usize {
        self.theta.ncols() - 1
    }
}

/// Row-wise `Θ·x̃` for a row-per-sample batch.
fn scores(theta: &Array2<f64>, x: ArrayView2<f64>) -> Array2<f64> {
    let mut z = x.dot(&theta.slice(s![.., 1..]).t());
    z += &theta.column(0);
    z
}

/// In-place stable softmax of each row; probabilities are kept strictly positive.
fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp().max(f64::MIN_POSITIVE));
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Class probabilities for one feature vector.
pub fn predict_proba(m: &SoftmaxModel, x: &[f64]) -> Result<Vec<f64>, SoftmaxError> {
    if x.len() != m.features() {
        return Err(SoftmaxError::Dimension {
            expected: m.features(),
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SoftmaxError::NonFinite);
    }
    let batch = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
    let mut z = scores(&m.theta, batch);
    softmax_rows(&mut z);
    Ok(z.into_raw_vec_and_offset().0)
}

/// Probabilities for a batch, one row per sample.
pub fn predict_proba_batch(m: &SoftmaxModel, x: ArrayView2<f64>) -> Result<Array2<f64>, SoftmaxError> {
    if x.ncols() != m.features() {
        return Err(SoftmaxError::Dimension {
            expected: m.features(),
            found: x.ncols(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SoftmaxError::NonFinite);
    }
    let mut z = scores(&m.theta, x);
    softmax_rows(&mut z);
    Ok(z)
}

fn check_data(
    k: usize,
    n: usize,
    x: ArrayView2<f64>,
    labels: &[ClassLabel],
) -> Result<(), SoftmaxError> {
    if x.nrows() == 0 {
        return Err(SoftmaxError::Empty);
    }
    if x.nrows() != labels.len() {
        return Err(SoftmaxError::Dimension {
            expected: x.nrows(),
            found: labels.len(),
        });
    }
    if x.ncols() != n {
        return Err(SoftmaxError::Dimension {
            expected: n,
            found: x.ncols(),
        });
    }
    if let Some(&label) = labels.iter().find(|l| l.index() >= k) {
        return Err(SoftmaxError::LabelOutOfRange { label, k });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SoftmaxError::NonFinite);
    }
    Ok(())
}

fn cost_grad_unchecked(
    theta: &Array2<f64>,
    x: ArrayView2<f64>,
    labels: &[ClassLabel],
    lambda: f64,
) -> (f64, Array2<f64>) {
    let m = x.nrows() as f64;
    let mut p = scores(theta, x);
    softmax_rows(&mut p);
    let mut loss = 0.0;
    for (i, l) in labels.iter().enumerate() {
        loss -= p[[i, l.index()]].ln();
        p[[i, l.index()]] -= 1.0;
    }
    // p now holds (p − onehot); gradient is (1/m)·(p − y)ᵀ·x̃ + λθ.
    p /= m;
    let mut grad = Array2::zeros(theta.dim());
    grad.column_mut(0).assign(&p.sum_axis(Axis(0)));
    grad.slice_mut(s![.., 1..]).assign(&p.t().dot(&x));
    grad.scaled_add(lambda, theta);
    let penalty = 0.5 * lambda * theta.iter().map(|t| t * t).sum::<f64>();
    (loss / m + penalty, grad)
}

/// Regularized negative log-likelihood and its exact gradient.
pub fn cost_grad(
    m: &SoftmaxModel,
    x: ArrayView2<f64>,
    labels: &[ClassLabel],
    lambda: f64,
) -> Result<(f64, Array2<f64>), SoftmaxError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SoftmaxError::Lambda(lambda));
    }
    check_data(m.classes(), m.features(), x, labels)?;
    Ok(cost_grad_unchecked(&m.theta, x, labels, lambda))
}

struct SoftmaxObjective<'a> {
    x: ArrayView2<'a, f64>,
    labels: &'a [ClassLabel],
    k: usize,
    lambda: f64,
}

impl SoftmaxObjective<'_> {
    fn theta(&self, flat: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((self.k, self.x.ncols() + 1), flat.to_vec()).expect("flat length")
    }
}

impl Objective for SoftmaxObjective<'_> {
    fn cost(&self, flat: &[f64]) -> f64 {
        self.cost_grad(flat).0
    }

    fn cost_grad(&self, flat: &[f64]) -> (f64, Vec<f64>) {
        let (c, g) = cost_grad_unchecked(&self.theta(flat), self.x, self.labels, self.lambda);
        (c, g.into_raw_vec_and_offset().0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxTraining {
    pub lambda: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for SoftmaxTraining {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            max_iters: DEFAULT_MAX_ITERS,
            grad_tol: DEFAULT_GRAD_TOL,
        }
    }
}

const DIRECTION: Direction = Direction::Lbfgs { memory: 10 };

/// Fits a `k`-class model. Every class `0..k` must occur in `labels`.
///
/// Weights start at `N(0, 0.005²)` draws from `seed`.
pub fn train(
    x: ArrayView2<f64>,
    labels: &[ClassLabel],
    k: usize,
    opts: &SoftmaxTraining,
    seed: u64,
) -> Result<(SoftmaxModel, DescentReport), SoftmaxError> {
    if !(2..=ClassLabel::COUNT).contains(&k) {
        return Err(SoftmaxError::ClassCount(k));
    }
    if !(opts.lambda >= 0.0 && opts.lambda.is_finite()) {
        return Err(SoftmaxError::Lambda(opts.lambda));
    }
    check_data(k, x.ncols(), x, labels)?;
    if let Some(missing) = ClassLabel::ALL[..k].iter().find(|c| !labels.contains(c)) {
        return Err(SoftmaxError::MissingClass(*missing));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.005).expect("valid sigma");
    let init: Vec<f64> = (0..k * (x.ncols() + 1)).map(|_| normal.sample(&mut rng)).collect();
    let obj = SoftmaxObjective {
        x,
        labels,
        k,
        lambda: opts.lambda,
    };
    let dopts = DescentOptions {
        max_iters: opts.max_iters,
        grad_tol: opts.grad_tol,
        direction: DIRECTION,
        ..DescentOptions::default()
    };
    let (flat, report) = optim::minimize(&obj, init, &dopts).map_err(|e| match e {
        DescentError::Diverged { iteration } => SoftmaxError::Diverged { iteration },
    })?;
    let model = SoftmaxModel::new(obj.theta(&flat), opts.lambda)?;
    Ok((model, report))
}

/// Classes sorted by descending probability; ties keep class order.
pub fn rank(probs: &[f64]) -> Vec<(ClassLabel, f64)> {
    let mut ranked: Vec<(ClassLabel, f64)> = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| (ClassLabel::from_index(i).expect("at most four classes"), p))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

/// Ranked class probabilities for one feature vector.
pub fn classify(m: &SoftmaxModel, x: &[f64]) -> Result<Vec<(ClassLabel, f64)>, SoftmaxError> {
    Ok(rank(&predict_proba(m, x)?))
}

/// Mean top-1 accuracy of a model on a labelled batch.
pub fn accuracy(m: &SoftmaxModel, x: ArrayView2<f64>, labels: &[ClassLabel]) -> Result<f64, SoftmaxError> {
    let p = predict_proba_batch(m, x)?;
    let hits = p
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, l)| rank(row.as_slice().expect("standard layout"))[0].0 == **l)
        .count();
    Ok(hits as f64 / labels.len().max(1) as f64)
}
