//! Deterministic full-batch descent with a backtracking Armijo line search.
//!
//! Every accepted step satisfies
//! `f(x + t·d) ≤ f(x) + c·t·∇f(x)ᵀd`, so the recorded cost sequence is
//! non-increasing.

use thiserror::Error;

/// A differentiable objective over a flat parameter vector.
pub trait Objective {
    fn cost(&self, x: &[f64]) -> f64;
    fn cost_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    /// Negative gradient.
    Steepest,
    /// Limited-memory BFGS two-loop recursion with the given history length.
    Lbfgs { memory: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iters: usize,
    /// Stop once `‖∇f‖∞` is at or below this.
    pub grad_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub direction: Direction,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            grad_tol: 1e-4,
            armijo: 1e-4,
            shrink: 0.5,
            direction: Direction::Steepest,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    /// Cost at the start point followed by the cost after every accepted step.
    pub costs: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

impl DescentReport {
    pub fn final_cost(&self) -> f64 {
        *self.costs.last().expect("at least the initial cost")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescentError {
    #[error("cost became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
}

const MIN_STEP: f64 = 1e-20;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct History {
    memory: usize,
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

impl History {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        // Skip pairs that would break positive definiteness.
        if dot(&s, &y) <= 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            return;
        }
        if self.s.len() == self.memory {
            self.s.remove(0);
            self.y.remove(0);
        }
        self.s.push(s);
        self.y.push(y);
    }

    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q = grad.to_vec();
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            alpha[i] = rho * dot(&self.s[i], &q);
            q.iter_mut().zip(&self.y[i]).for_each(|(q, y)| *q -= alpha[i] * y);
        }
        if k > 0 {
            let gamma = dot(&self.s[k - 1], &self.y[k - 1]) / dot(&self.y[k - 1], &self.y[k - 1]);
            q.iter_mut().for_each(|q| *q *= gamma);
        }
        for i in 0..k {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            let beta = rho * dot(&self.y[i], &q);
            q.iter_mut().zip(&self.s[i]).for_each(|(q, s)| *q += (alpha[i] - beta) * s);
        }
        q.iter_mut().for_each(|q| *q = -*q);
        q
    }
}

/// Minimizes `f` from `x0`, returning the final point and a trace.
///
/// Steepest descent starts each line search at twice the previously accepted
/// step; L-BFGS starts at the unit step. A line search that cannot find a
/// decrease above the minimum step ends the run unconverged.
pub fn minimize(
    f: &impl Objective,
    x0: Vec<f64>,
    opts: &DescentOptions,
) -> Result<(Vec<f64>, DescentReport), DescentError> {
    let mut x = x0;
    let (mut cost, mut grad) = f.cost_grad(&x);
    if !cost.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(DescentError::Diverged { iteration: 0 });
    }
    let mut report = DescentReport {
        costs: vec![cost],
        iterations: 0,
        grad_norm: inf_norm(&grad),
        converged: false,
    };
    let mut history = match opts.direction {
        Direction::Lbfgs { memory } => Some(History {
            memory: memory.max(1),
            s: Vec::new(),
            y: Vec::new(),
        }),
        Direction::Steepest => None,
    };
    let mut step = 1.0 / (dot(&grad, &grad).sqrt()).max(1.0);

    for iter in 0..opts.max_iters {
        if report.grad_norm <= opts.grad_tol {
            report.converged = true;
            break;
        }
        let mut dir = match &history {
            Some(h) => h.direction(&grad),
            None => grad.iter().map(|g| -g).collect(),
        };
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            // Not a descent direction; fall back to the gradient.
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
            if let Some(h) = history.as_mut() {
                h.s.clear();
                h.y.clear();
            }
        }
        let mut t = match &history {
            Some(h) if !h.s.is_empty() => 1.0,
            Some(_) => 1.0 / dot(&grad, &grad).sqrt().max(1.0),
            None => step * 2.0,
        };
        let mut trial = vec![0.0; x.len()];
        let accepted = loop {
            trial
                .iter_mut()
                .zip(x.iter().zip(&dir))
                .for_each(|(t_i, (x_i, d_i))| *t_i = x_i + t * d_i);
            let c = f.cost(&trial);
            if c.is_finite() && c <= cost + opts.armijo * t * slope {
                break true;
            }
            t *= opts.shrink;
            if t < MIN_STEP {
                break false;
            }
        };
        if !accepted {
            break;
        }
        let (new_cost, new_grad) = f.cost_grad(&trial);
        if !new_cost.is_finite() || new_grad.iter().any(|g| !g.is_finite()) {
            return Err(DescentError::Diverged { iteration: iter + 1 });
        }
        if let Some(h) = history.as_mut() {
            let s = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            h.push(s, y);
        }
        step = t;
        x = trial;
        cost = new_cost;
        grad = new_grad;
        report.costs.push(cost);
        report.iterations = iter + 1;
        report.grad_norm = inf_norm(&grad);
    }
    if report.grad_norm <= opts.grad_tol {
        report.converged = true;
    }
    Ok((x, report))
}
