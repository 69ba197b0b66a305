//! Distribution of a total γ budget across the gates of a circuit.
//!
//! With `x_i = log γ_i` the product constraint becomes `Σ x_i = log γ_total`
//! and the objective `Σ ε_i(exp x_i)` is minimized by projected descent from
//! several starting points.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QpdError, Result};
use crate::qpd::TradeoffCurve;

/// Error level below which a curve counts as fully corrected.
pub const EXACT_ERROR: f64 = 1e-6;

const MIN_STARTS: usize = 8;
const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAllocation {
    pub gamma_total: f64,
    pub labels: Vec<String>,
    pub budgets: Vec<f64>,
    /// `ε_i(γ_i)` per gate.
    pub errors: Vec<f64>,
    /// `Σ ε_i(γ_i)`.
    pub objective: f64,
    /// Index of the winning start; `None` when no search was needed.
    pub start: Option<usize>,
    pub notice: Option<String>,
}

impl BudgetAllocation {
    pub fn csv_header() -> &'static str {
        "gamma_total,gate_label,gamma_budget,error_contribution"
    }

    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for ((l, b), e) in self.labels.iter().zip(&self.budgets).zip(&self.errors) {
            s.push_str(&format!(
                "{},{},{},{}\n",
                crate::fmt17(self.gamma_total),
                l,
                crate::fmt17(*b),
                crate::fmt17(*e)
            ));
        }
        s
    }

    /// `|Σ log γ_i − log γ_total|`.
    pub fn constraint_residual(&self) -> f64 {
        (self.budgets.iter().map(|b| b.ln()).sum::<f64>() - self.gamma_total.ln()).abs()
    }

    /// Share of `log γ_total` given to gate `i`.
    pub fn log_share(&self, i: usize) -> f64 {
        let total = self.gamma_total.ln();
        if total <= 0.0 {
            return 0.0;
        }
        self.budgets[i].ln() / total
    }
}

/// Piecewise-linear error of `curve` at `gamma`.
pub fn curve_eval(curve: &TradeoffCurve, gamma: f64) -> Result<f64> {
    curve.eval(gamma)
}

/// Smallest sampled budget whose error is at most [`EXACT_ERROR`].
pub fn exact_budget(curve: &TradeoffCurve) -> Result<f64> {
    curve
        .samples
        .iter()
        .find(|(_, e)| *e <= EXACT_ERROR)
        .map(|(g, _)| *g)
        .ok_or_else(|| {
            QpdError::InvalidInput(format!("curve `{}` never reaches error {EXACT_ERROR:e}", curve.label))
        })
}

struct Problem<'a> {
    curves: &'a [TradeoffCurve],
    upper: Vec<f64>,
    total: f64,
}

impl Problem<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        self.curves.iter().zip(x).map(|(c, &xi)| c.eval_clamped(xi.exp())).sum()
    }

    /// Euclidean projection onto `{Σ x = total, 0 ≤ x ≤ upper}`.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let clip = |tau: f64| -> Vec<f64> { y.iter().zip(&self.upper).map(|(v, u)| (v - tau).clamp(0.0, *u)).collect() };
        let sum = |x: &[f64]| x.iter().sum::<f64>();
        let span = y.iter().chain(&self.upper).fold(0.0f64, |m, v| m.max(v.abs())) + self.total + 1.0;
        let (mut lo, mut hi) = (-span, span);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum(&clip(mid)) > self.total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = clip(0.5 * (lo + hi));
        // Put the remaining rounding error on coordinates with room to move.
        let mut r = self.total - sum(&x);
        for (xi, u) in x.iter_mut().zip(&self.upper) {
            if r == 0.0 {
                break;
            }
            let moved = (*xi + r).clamp(0.0, *u);
            r -= moved - *xi;
            *xi = moved;
        }
        x
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let c = &self.curves[i];
                let up = (x[i] + FD_STEP).exp();
                let down = (x[i] - FD_STEP).max(0.0).exp();
                let width = (x[i] + FD_STEP) - (x[i] - FD_STEP).max(0.0);
                (c.eval_clamped(up) - c.eval_clamped(down)) / width
            })
            .collect()
    }

    /// Projected gradient descent with step halving.
    fn descend(&self, x0: Vec<f64>) -> (Vec<f64>, f64) {
        let mut x = self.project(&x0);
        let mut f = self.objective(&x);
        let mut step = self.total.max(1e-3);
        for _ in 0..2000 {
            let g = self.gradient(&x);
            let mut improved = false;
            while step > 1e-14 {
                let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
                let xn = self.project(&y);
                let fn_ = self.objective(&xn);
                if fn_ < f - 1e-15 {
                    x = xn;
                    f = fn_;
                    improved = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (x, f)
    }
}

/// Minimizes `Σ ε_i(γ_i)` subject to `Π γ_i = γ_total` and `γ_i ≥ 1`.
///
/// Budgets never exceed the smallest exactly correcting budget of their
/// curve; surplus beyond `Π γ_opt,i` is spread over the gates, which leaves
/// every error at zero.
pub fn optimize_budget(curves: &[TradeoffCurve], gamma_total: f64) -> Result<BudgetAllocation> {
    if curves.is_empty() {
        return Err(QpdError::InvalidInput("no tradeoff curves".into()));
    }
    if !(gamma_total >= 1.0) || !gamma_total.is_finite() {
        return Err(QpdError::InvalidInput(format!("γ_total must be a finite number ≥ 1, got {gamma_total}")));
    }
    if let Some(c) = curves.iter().find(|c| c.min_budget() > 1.0 + 1e-12) {
        return Err(QpdError::InvalidInput(format!("curve `{}` has no sample at γ = 1", c.label)));
    }
    let labels: Vec<String> = curves.iter().map(|c| c.label.clone()).collect();
    let opt: Vec<f64> = curves.iter().map(exact_budget).collect::<Result<_>>()?;
    let total = gamma_total.ln();
    let upper: Vec<f64> = opt.iter().map(|g| g.ln()).collect();
    let m = curves.len();
    let finish = |budgets: Vec<f64>, start: Option<usize>, notice: Option<String>| {
        let errors: Vec<f64> = curves.iter().zip(&budgets).map(|(c, &b)| c.eval_clamped(b)).collect();
        BudgetAllocation { gamma_total, labels: labels.clone(), objective: errors.iter().sum(), budgets, errors, start, notice }
    };

    let cap: f64 = upper.iter().sum();
    if total >= cap {
        let extra = (total - cap) / m as f64;
        let budgets = upper.iter().map(|u| (u + extra).exp()).collect();
        return Ok(finish(budgets, None, Some("budget covers exact correction of every gate".into())));
    }
    let flat = curves.iter().all(|c| {
        let (lo, hi) = c.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.1), b.max(s.1)));
        hi - lo <= 1e-15
    });
    let problem = Problem { curves, upper, total };
    if flat {
        let x = problem.project(&vec![total / m as f64; m]);
        let budgets = x.iter().map(|v| v.exp()).collect();
        return Ok(finish(budgets, None, Some("all curves are flat; returning the uniform split".into())));
    }

    let mut starts: Vec<Vec<f64>> = vec![vec![total / m as f64; m]];
    for i in 0..m {
        let mut y = vec![0.0; m];
        y[i] = total;
        starts.push(y);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    while starts.len() < MIN_STARTS {
        let w: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut rng)).collect();
        let s: f64 = w.iter().sum();
        starts.push(w.iter().map(|v| total * v / s).collect());
    }
    let runs: Vec<(Vec<f64>, f64)> = starts.into_par_iter().map(|s| problem.descend(s)).collect();
    let (best, (x, _)) = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .expect("at least one start");
    let budgets = x.iter().map(|v| v.exp()).collect();
    Ok(finish(budgets, Some(best), None))
}
