//! Quasiprobability decompositions, diamond norms and tradeoff curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChoiJson, ChoiMatrix};
use crate::error::{QpdError, Result};
use crate::linalg::{c, frobenius, ComplexMatrix, RealMatrix, C64};
use crate::solver::{self, ComplexSdpBuilder, HermitianVar, LinearProgram, SolveStatus};

/// A labeled channel of a decomposition set.
pub type LabeledChannel = (String, ChoiMatrix);

#[derive(Debug, Clone, PartialEq)]
pub struct QpdItem {
    pub label: String,
    pub coefficient: f64,
    pub choi: ChoiMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiprobabilityDecomposition {
    pub target: ChoiMatrix,
    pub items: Vec<QpdItem>,
    pub gamma: f64,
    pub residual: f64,
}

impl QuasiprobabilityDecomposition {
    /// `Σ a_i Λ_i`.
    pub fn recombine(&self) -> ChoiMatrix {
        if self.items.is_empty() {
            return ChoiMatrix::zero(self.target.n_in(), self.target.n_out());
        }
        ChoiMatrix::linear_combination(self.items.iter().map(|it| (it.coefficient, &it.choi)))
            .expect("items share the target shape")
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.items.iter().map(|it| it.coefficient).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.residual <= 1e-7
    }

    pub fn to_json(&self) -> QpdJson {
        QpdJson {
            gamma: self.gamma,
            residual: self.residual,
            items: self
                .items
                .iter()
                .enumerate()
                .map(|(i, it)| QpdItemJson { label: it.label.clone(), a: it.coefficient, choi_ref: format!("set/{i}") })
                .collect(),
        }
    }

    /// The Choi matrices referenced by `choi_ref`, in item order.
    pub fn choi_bundle(&self) -> Vec<ChoiJson> {
        self.items.iter().map(|it| it.choi.to_json()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpdItemJson {
    pub label: String,
    pub a: f64,
    pub choi_ref: String,
}

/// `{gamma, residual, items: [{label, a, choi_ref}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpdJson {
    pub gamma: f64,
    pub residual: f64,
    pub items: Vec<QpdItemJson>,
}

/// Which semidefinite program evaluates the diamond norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiamondForm {
    /// `min ½(‖tr_out Y0‖ + ‖tr_out Y1‖)` over `[[Y0, −J], [−J, Y1]] ⪰ 0`.
    Dual,
    /// The dual restricted to `Y0 = Y1 = Y`: `min ‖tr_out Y‖` over `Y ± J ⪰ 0`.
    /// Same optimum for Hermitian `J`.
    Symmetric,
    /// `max Re⟨J, X⟩` over `[[ρ0⊗I, X], [X†, ρ1⊗I]] ⪰ 0` with unit-trace `ρ0, ρ1`.
    Primal,
}

/// Diamond norm of the Hermitian-preserving map with (normalized) Choi
/// matrix `Λ`. The programs act on `J = d_in · Λ`.
pub fn diamond_norm(choi: &ChoiMatrix) -> Result<f64> {
    diamond_norm_with(choi, DiamondForm::Dual)
}

pub fn diamond_distance(a: &ChoiMatrix, b: &ChoiMatrix) -> Result<f64> {
    diamond_norm(&a.sub(b)?)
}

pub fn diamond_norm_with(choi: &ChoiMatrix, form: DiamondForm) -> Result<f64> {
    let j = choi.matrix().scale(choi.d_in() as f64);
    let herm = crate::linalg::hermitian_deviation(&j);
    if herm > 1e-9 * (1.0 + frobenius(&j)) {
        return Err(QpdError::NotHermitian(herm));
    }
    let j = crate::linalg::hermitian_part(&j);
    // The norm is homogeneous; solve at unit scale.
    let norm = frobenius(&j);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let j = j.unscale(norm);
    let (di, dout) = (choi.d_in(), choi.d_out());
    let sol = match form {
        DiamondForm::Dual => {
            let d = di * dout;
            let mut b = ComplexSdpBuilder::new();
            let t0 = b.scalar(0.5);
            let t1 = b.scalar(0.5);
            let y0 = b.hermitian_var(d);
            let y1 = b.hermitian_var(d);
            let mut constant = ComplexMatrix::zeros(2 * d, 2 * d);
            constant.view_mut((0, d), (d, d)).copy_from(&(-&j));
            constant.view_mut((d, 0), (d, d)).copy_from(&(-&j));
            let big = b.block(constant);
            b.add_hermitian(big, &y0, 1.0, |e| e.to_vec());
            b.add_hermitian(big, &y1, 1.0, |e| e.iter().map(|&(r, c, z)| (r + d, c + d, z)).collect());
            for (t, y) in [(t0, &y0), (t1, &y1)] {
                let blk = b.block(ComplexMatrix::zeros(di, di));
                b.add_identity(blk, t, 1.0);
                b.add_hermitian(blk, y, -1.0, |e| trace_out_entries(e, dout));
            }
            solver::solve_sdp(&b.build())?.require_optimal("diamond norm (dual)")?
        }
        DiamondForm::Symmetric => {
            let mut b = ComplexSdpBuilder::new();
            let t = b.scalar(1.0);
            let y = b.hermitian_var(di * dout);
            add_symmetric_diamond_blocks(&mut b, &j, &y, t, dout, &[]);
            solver::solve_sdp(&b.build())?.require_optimal("diamond norm (symmetric dual)")?
        }
        DiamondForm::Primal => {
            let d = di * dout;
            let mut b = ComplexSdpBuilder::new();
            let rho0 = b.hermitian_var(di);
            let rho1 = b.hermitian_var(di);
            let big = b.block(ComplexMatrix::zeros(2 * d, 2 * d));
            let lift = |e: &[(usize, usize, C64)], off: usize| -> Vec<(usize, usize, C64)> {
                let mut out = Vec::new();
                for &(r, c, z) in e {
                    for a in 0..dout {
                        out.push((off + r * dout + a, off + c * dout + a, z));
                    }
                }
                out
            };
            b.add_hermitian(big, &rho0, 1.0, |e| lift(e, 0));
            b.add_hermitian(big, &rho1, 1.0, |e| lift(e, d));
            for r in 0..d {
                for col in 0..d {
                    let z = j[(r, col)];
                    let xr = b.scalar(-z.re);
                    b.add_sparse(big, xr, &[(r, d + col, c(1.0, 0.0)), (d + col, r, c(1.0, 0.0))]);
                    let xi = b.scalar(-z.im);
                    b.add_sparse(big, xi, &[(r, d + col, c(0.0, 1.0)), (d + col, r, c(0.0, -1.0))]);
                }
            }
            for rho in [&rho0, &rho1] {
                let diag: Vec<(usize, f64)> = rho.coords[..di].iter().map(|(k, _)| (*k, 1.0)).collect();
                b.equality(diag, 1.0);
            }
            let sol = solver::solve_sdp(&b.build())?.require_optimal("diamond norm (primal)")?;
            return Ok(-sol.objective * norm);
        }
    };
    Ok(sol.objective.max(0.0) * norm)
}

/// Maps basis entries of an operator on `in ⊗ out` to their partial trace
/// over `out`.
fn trace_out_entries(e: &[(usize, usize, C64)], dout: usize) -> Vec<(usize, usize, C64)> {
    e.iter().filter(|&&(r, c, _)| r % dout == c % dout).map(|&(r, c, z)| (r / dout, c / dout, z)).collect()
}

/// Adds `Y − R ⪰ 0`, `Y + R ⪰ 0` and `t·I − tr_out Y ⪰ 0` where
/// `R = J − Σ a_k J_k` with `terms = [(var a_k, J_k)]`.
fn add_symmetric_diamond_blocks(
    b: &mut ComplexSdpBuilder,
    j: &ComplexMatrix,
    y: &HermitianVar,
    t: usize,
    dout: usize,
    terms: &[(usize, ComplexMatrix)],
) {
    let di = j.nrows() / dout;
    for sign in [-1.0, 1.0] {
        let blk = b.block(j.scale(sign));
        b.add_hermitian(blk, y, 1.0, |e| e.to_vec());
        for (var, jk) in terms {
            b.add_dense(blk, *var, &jk.scale(-sign));
        }
    }
    let blk = b.block(ComplexMatrix::zeros(di, di));
    b.add_identity(blk, t, 1.0);
    b.add_hermitian(blk, y, -1.0, |e| trace_out_entries(e, dout));
}

/// Real coordinates of a Hermitian matrix, isometric for the Frobenius norm:
/// diagonal, then `√2·Re` and `√2·Im` of the upper triangle.
pub fn hermitian_coordinates(m: &ComplexMatrix) -> Vec<f64> {
    let d = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(m[(k, k)].re);
    }
    for r in 0..d {
        for col in r + 1..d {
            let z = (m[(r, col)] + m[(col, r)].conj()) * 0.5;
            out.push(s * z.re);
            out.push(s * z.im);
        }
    }
    out
}

fn check_set(target: &ChoiMatrix, set: &[LabeledChannel]) -> Result<()> {
    if set.is_empty() {
        return Err(QpdError::InvalidInput("decomposition set is empty".into()));
    }
    if let Some((label, _)) = set.iter().find(|(_, ch)| !ch.same_shape(target)) {
        return Err(QpdError::Dimension(format!("set element `{label}` does not match the target shape")));
    }
    Ok(())
}

fn build_qpd(target: &ChoiMatrix, set: &[LabeledChannel], a: &[f64], residual: f64) -> QuasiprobabilityDecomposition {
    let items: Vec<QpdItem> = set
        .iter()
        .zip(a)
        .map(|((label, ch), &coef)| QpdItem { label: label.clone(), coefficient: coef, choi: ch.clone() })
        .collect();
    let gamma = a.iter().map(|v| v.abs()).sum();
    QuasiprobabilityDecomposition { target: target.clone(), items, gamma, residual }
}

/// Minimal-`γ` exact decomposition of `target` over `set` by linear programming.
pub fn exact_qpd(target: &ChoiMatrix, set: &[LabeledChannel]) -> Result<QuasiprobabilityDecomposition> {
    check_set(target, set)?;
    let k = set.len();
    let b = hermitian_coordinates(target.matrix());
    let n = b.len();
    let mut a_mat = RealMatrix::zeros(n, k);
    for (col, (_, ch)) in set.iter().enumerate() {
        for (row, v) in hermitian_coordinates(ch.matrix()).into_iter().enumerate() {
            a_mat[(row, col)] = v;
        }
    }
    let bv = nalgebra::DVector::from_vec(b.clone());

    // Least-squares presolve: span membership and a reduced row basis.
    let svd = a_mat.clone().svd(true, false);
    let u = svd.u.as_ref().expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax.max(1e-300)).collect();
    let mut proj = nalgebra::DVector::zeros(n);
    for &i in &keep {
        let ui = u.column(i);
        proj.axpy(ui.dot(&bv), &ui, 1.0);
    }
    let miss = (&bv - &proj).norm();
    if miss > 1e-9 * (1.0 + bv.norm()) {
        return Err(QpdError::NotInSpan(miss));
    }
    let ur = RealMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])]);
    let reduced = ur.tr_mul(&a_mat);
    let rhs = ur.tr_mul(&bv);

    let mut lp = LinearProgram::nonnegative(vec![1.0; 2 * k]);
    for r in 0..reduced.nrows() {
        let mut row = vec![0.0; 2 * k];
        for col in 0..k {
            row[col] = reduced[(r, col)];
            row[k + col] = -reduced[(r, col)];
        }
        lp.eq_matrix.push(row);
        lp.eq_rhs.push(rhs[r]);
    }
    let sol = solver::solve_lp(&lp)?;
    if sol.status == SolveStatus::Infeasible {
        return Err(QpdError::NotInSpan(miss));
    }
    let sol = sol.require_optimal("exact QPD")?;
    let a: Vec<f64> = (0..k).map(|i| sol.x[i] - sol.x[k + i]).collect();
    let mut q = build_qpd(target, set, &a, 0.0);
    let diff = target.sub(&q.recombine())?;
    q.residual = if frobenius(diff.matrix()) < 1e-13 { 0.0 } else { diamond_norm_with(&diff, DiamondForm::Symmetric)? };
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PhysicalityFlags {
    /// `Σ a_i Λ_i ⪰ 0`.
    pub enforce_cp: bool,
    /// `tr₂ Σ a_i Λ_i = tr₂ Λ_target` (`= I/d_in` for trace-preserving targets).
    pub enforce_tp: bool,
}

impl PhysicalityFlags {
    pub const NONE: Self = Self { enforce_cp: false, enforce_tp: false };
    pub const TPCP: Self = Self { enforce_cp: true, enforce_tp: true };
}

enum Goal {
    MinError { budget: f64 },
    MinGamma { max_error: f64 },
}

struct ApproxSolution {
    a: Vec<f64>,
    error: f64,
}

fn approximate_program(
    target: &ChoiMatrix,
    set: &[LabeledChannel],
    goal: Goal,
    flags: PhysicalityFlags,
) -> Result<ApproxSolution> {
    let (di, dout) = (target.d_in(), target.d_out());
    let scale = di as f64;
    let j = crate::linalg::hermitian_part(&target.matrix().scale(scale));
    let k = set.len();
    let mut b = ComplexSdpBuilder::new();
    let (t_cost, u_cost) = match goal {
        Goal::MinError { .. } => (1.0, 0.0),
        Goal::MinGamma { .. } => (0.0, 1.0),
    };
    let a_vars: Vec<usize> = (0..k).map(|_| b.scalar(0.0)).collect();
    let u_vars: Vec<usize> = (0..k).map(|_| b.scalar(u_cost)).collect();
    let t = b.scalar(t_cost);
    let y = b.hermitian_var(di * dout);
    let terms: Vec<(usize, ComplexMatrix)> =
        a_vars.iter().zip(set).map(|(&v, (_, ch))| (v, crate::linalg::hermitian_part(&ch.matrix().scale(scale)))).collect();
    add_symmetric_diamond_blocks(&mut b, &j, &y, t, dout, &terms);
    for (&a, &u) in a_vars.iter().zip(&u_vars) {
        b.inequality(vec![(u, 1.0), (a, -1.0)], 0.0);
        b.inequality(vec![(u, 1.0), (a, 1.0)], 0.0);
    }
    match goal {
        Goal::MinError { budget } => b.inequality(u_vars.iter().map(|&u| (u, -1.0)).collect(), budget),
        Goal::MinGamma { max_error } => b.inequality(vec![(t, -1.0)], max_error),
    }
    if flags.enforce_cp {
        let blk = b.block(ComplexMatrix::zeros(di * dout, di * dout));
        for (v, (_, ch)) in a_vars.iter().zip(set) {
            b.add_dense(blk, *v, &crate::linalg::hermitian_part(&ch.matrix().scale(scale)));
        }
    }
    if flags.enforce_tp {
        let target_marg = hermitian_coordinates(&target.marginal());
        let margs: Vec<Vec<f64>> = set.iter().map(|(_, ch)| hermitian_coordinates(&ch.marginal())).collect();
        for (row, rhs) in target_marg.iter().enumerate() {
            let coeffs: Vec<(usize, f64)> =
                a_vars.iter().zip(&margs).filter(|(_, m)| m[row] != 0.0).map(|(&v, m)| (v, m[row])).collect();
            b.equality(coeffs, *rhs);
        }
    }
    let sol = solver::solve_sdp(&b.build())?;
    if sol.status == SolveStatus::Infeasible {
        return Err(QpdError::Solver { status: sol.status, detail: "approximate QPD program is infeasible".into() });
    }
    let sol = sol.require_optimal("approximate QPD")?;
    let a: Vec<f64> = a_vars.iter().map(|&v| sol.x[v]).collect();
    Ok(ApproxSolution { a, error: sol.x[t].max(0.0) })
}

/// True when the target is trace preserving and every set element is CP and
/// trace non-increasing. Then `γ = 1` with the marginal constraint admits
/// only convex mixtures of the trace-preserving elements.
fn unit_budget_face(target: &ChoiMatrix, set: &[LabeledChannel]) -> bool {
    target.marginal_deviation(1.0) <= 1e-9
        && set.iter().all(|(_, ch)| {
            let v = crate::channel::is_tpcp(ch, 1e-9);
            v.completely_positive && ch.trace() <= 1.0 + 1e-9
        })
}

fn convex_mixture_program(
    target: &ChoiMatrix,
    set: &[LabeledChannel],
) -> Result<ApproxSolution> {
    let tp: Vec<usize> = (0..set.len()).filter(|&i| set[i].1.marginal_deviation(1.0) <= 1e-9).collect();
    if tp.is_empty() {
        return Err(QpdError::Solver {
            status: SolveStatus::Infeasible,
            detail: "no trace-preserving element available at γ = 1".into(),
        });
    }
    let (di, dout) = (target.d_in(), target.d_out());
    let scale = di as f64;
    let j = crate::linalg::hermitian_part(&target.matrix().scale(scale));
    let mut b = ComplexSdpBuilder::new();
    let a_vars: Vec<usize> = tp.iter().map(|_| b.scalar(0.0)).collect();
    let t = b.scalar(1.0);
    let y = b.hermitian_var(di * dout);
    let terms: Vec<(usize, ComplexMatrix)> = a_vars
        .iter()
        .zip(&tp)
        .map(|(&v, &i)| (v, crate::linalg::hermitian_part(&set[i].1.matrix().scale(scale))))
        .collect();
    add_symmetric_diamond_blocks(&mut b, &j, &y, t, dout, &terms);
    for &a in &a_vars {
        b.inequality(vec![(a, 1.0)], 0.0);
    }
    b.equality(a_vars.iter().map(|&a| (a, 1.0)).collect(), 1.0);
    let sol = solver::solve_sdp(&b.build())?.require_optimal("approximate QPD at unit budget")?;
    let mut a = vec![0.0; set.len()];
    for (&v, &i) in a_vars.iter().zip(&tp) {
        a[i] = sol.x[v];
    }
    Ok(ApproxSolution { a, error: sol.x[t].max(0.0) })
}

/// Minimal diamond-norm error `‖Λ_target − Σ a_i Λ_i‖⋄` subject to `Σ|a_i| ≤ γ_budget`.
pub fn approximate_qpd(
    target: &ChoiMatrix,
    set: &[LabeledChannel],
    gamma_budget: f64,
    flags: PhysicalityFlags,
) -> Result<QuasiprobabilityDecomposition> {
    check_set(target, set)?;
    if !(gamma_budget >= 0.0) || !gamma_budget.is_finite() {
        return Err(QpdError::InvalidInput(format!("γ budget must be a finite nonnegative number, got {gamma_budget}")));
    }
    if gamma_budget == 0.0 && !flags.enforce_tp {
        let zeros = vec![0.0; set.len()];
        return Ok(build_qpd(target, set, &zeros, diamond_norm(target)?));
    }
    if flags.enforce_tp && gamma_budget <= 1.0 + 1e-9 && unit_budget_face(target, set) {
        if gamma_budget < 1.0 - 1e-9 {
            return Err(QpdError::Solver {
                status: SolveStatus::Infeasible,
                detail: format!("a trace-preserving approximation needs γ ≥ 1, budget is {gamma_budget}"),
            });
        }
        let sol = convex_mixture_program(target, set)?;
        return Ok(build_qpd(target, set, &sol.a, sol.error));
    }
    let sol = approximate_program(target, set, Goal::MinError { budget: gamma_budget }, flags)?;
    Ok(build_qpd(target, set, &sol.a, sol.error))
}

/// Minimal `γ` subject to a diamond-norm error of at most `max_error`.
pub fn min_gamma_qpd(
    target: &ChoiMatrix,
    set: &[LabeledChannel],
    max_error: f64,
    flags: PhysicalityFlags,
) -> Result<QuasiprobabilityDecomposition> {
    check_set(target, set)?;
    let sol = approximate_program(target, set, Goal::MinGamma { max_error }, flags)?;
    Ok(build_qpd(target, set, &sol.a, sol.error))
}

/// Sampled error-versus-budget curve, interpolated piecewise linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub label: String,
    /// `(γ_budget, diamond error)` sorted by budget.
    pub samples: Vec<(f64, f64)>,
}

impl TradeoffCurve {
    pub fn new(label: impl Into<String>, mut samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(QpdError::InvalidInput("tradeoff curve needs at least one sample".into()));
        }
        if samples.iter().any(|(g, e)| !g.is_finite() || !e.is_finite()) {
            return Err(QpdError::InvalidInput("tradeoff curve samples must be finite".into()));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { label: label.into(), samples })
    }

    pub fn min_budget(&self) -> f64 {
        self.samples[0].0
    }

    pub fn max_budget(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Error at `γ`; flat beyond the last sample.
    pub fn eval(&self, gamma: f64) -> Result<f64> {
        if gamma < self.min_budget() - 1e-12 {
            return Err(QpdError::InvalidInput(format!(
                "budget {gamma} below the curve's first sample {}",
                self.min_budget()
            )));
        }
        Ok(self.eval_clamped(gamma))
    }

    pub(crate) fn eval_clamped(&self, gamma: f64) -> f64 {
        let s = &self.samples;
        if gamma <= s[0].0 {
            return s[0].1;
        }
        if gamma >= s[s.len() - 1].0 {
            return s[s.len() - 1].1;
        }
        let hi = s.partition_point(|p| p.0 <= gamma);
        let (g0, e0) = s[hi - 1];
        let (g1, e1) = s[hi];
        if g1 == g0 {
            return e1;
        }
        e0 + (e1 - e0) * (gamma - g0) / (g1 - g0)
    }

    /// Largest rise of the error between consecutive samples.
    pub fn max_rise(&self) -> (f64, f64) {
        self.samples
            .windows(2)
            .map(|w| (w[1].0, w[1].1 - w[0].1))
            .fold((self.samples[0].0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }

    /// Largest violation of midpoint convexity over consecutive sample triples,
    /// measured against the chord through the outer points.
    pub fn max_convexity_violation(&self) -> f64 {
        self.samples
            .windows(3)
            .map(|w| {
                let (g0, e0) = w[0];
                let (g1, e1) = w[1];
                let (g2, e2) = w[2];
                let chord = e0 + (e2 - e0) * (g1 - g0) / (g2 - g0);
                e1 - chord
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma_budget,diamond_error\n");
        for (g, e) in &self.samples {
            s.push_str(&format!("{},{}\n", crate::fmt17(*g), crate::fmt17(*e)));
        }
        s
    }
}

/// 21 geometrically spaced budgets from 1 to `1.05·γ_opt`.
pub fn default_budget_grid(gamma_opt: f64) -> Vec<f64> {
    budget_grid(gamma_opt, 21)
}

pub fn budget_grid(gamma_opt: f64, points: usize) -> Vec<f64> {
    let top = (1.05 * gamma_opt).max(1.0);
    if points <= 1 {
        return vec![1.0];
    }
    (0..points).map(|i| top.powf(i as f64 / (points - 1) as f64)).collect()
}

/// One approximate-QPD solve per budget; fails if the curve rises by more
/// than `1e-6` anywhere.
pub fn tradeoff_curve(
    label: &str,
    target: &ChoiMatrix,
    set: &[LabeledChannel],
    budgets: &[f64],
    flags: PhysicalityFlags,
) -> Result<TradeoffCurve> {
    if budgets.is_empty() {
        return Err(QpdError::InvalidInput("empty budget grid".into()));
    }
    if budgets.windows(2).any(|w| w[1] < w[0]) || budgets[0] < 0.0 {
        return Err(QpdError::InvalidInput("budgets must be sorted and nonnegative".into()));
    }
    let errors: Vec<Result<f64>> =
        budgets.par_iter().map(|&g| approximate_qpd(target, set, g, flags).map(|q| q.residual)).collect();
    let mut samples = Vec::with_capacity(budgets.len());
    for (g, e) in budgets.iter().zip(errors) {
        samples.push((*g, e?));
    }
    let curve = TradeoffCurve::new(label, samples)?;
    let (at, rise) = curve.max_rise();
    if rise > 1e-6 {
        return Err(QpdError::NonMonotone { budget: at, rise });
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{choi_from_unitary, compose};
    use crate::gates::{gate_matrix, paulis, GateKind};
    use crate::linalg;

    fn noisy_pauli_set(u: &ComplexMatrix, p: f64) -> Vec<LabeledChannel> {
        let dep = ChoiMatrix::depolarizing(1, p);
        let cu = choi_from_unitary(u).unwrap();
        ["I", "X", "Y", "Z"]
            .iter()
            .zip(paulis())
            .map(|(l, pm)| {
                let ch = compose(&dep, &compose(&choi_from_unitary(&pm).unwrap(), &cu).unwrap()).unwrap();
                (l.to_string(), ch)
            })
            .collect()
    }

    #[test]
    fn diamond_of_zero_and_unitary_difference() {
        assert_eq!(diamond_norm(&ChoiMatrix::zero(1, 1)).unwrap(), 0.0);
        let id = ChoiMatrix::identity(1);
        let x = choi_from_unitary(&crate::gates::pauli_x()).unwrap();
        let diff = id.sub(&x).unwrap();
        for form in [DiamondForm::Dual, DiamondForm::Symmetric, DiamondForm::Primal] {
            let v = diamond_norm_with(&diff, form).unwrap();
            assert!((v - 2.0).abs() < 1e-6, "{form:?}: {v}");
        }
    }

    #[test]
    fn diamond_of_depolarizing_gap() {
        let diff = ChoiMatrix::identity(1).sub(&ChoiMatrix::depolarizing(1, 0.1)).unwrap();
        for form in [DiamondForm::Dual, DiamondForm::Symmetric, DiamondForm::Primal] {
            let v = diamond_norm_with(&diff, form).unwrap();
            assert!((v - 0.15).abs() < 1e-6, "{form:?}: {v}");
        }
    }

    #[test]
    fn exact_identity_in_itself() {
        let id = ChoiMatrix::identity(1);
        let q = exact_qpd(&id, &[("I".into(), id.clone())]).unwrap();
        assert!((q.gamma - 1.0).abs() < 1e-7);
        assert!((q.items[0].coefficient - 1.0).abs() < 1e-7);
        assert!(q.is_exact());
    }

    #[test]
    fn exact_inverse_depolarizing() {
        let u = gate_matrix(&GateKind::Ry(0.3));
        let target = choi_from_unitary(&u).unwrap();
        for p in [0.01, 0.05, 0.1] {
            let q = exact_qpd(&target, &noisy_pauli_set(&u, p)).unwrap();
            let closed = (1.0 + p / 2.0) / (1.0 - p);
            assert!((q.gamma - closed).abs() < 1e-6, "p={p}: {} vs {closed}", q.gamma);
            assert!(frobenius(&(q.recombine().matrix() - target.matrix())) < 1e-7);
        }
    }

    #[test]
    fn exact_reports_missing_span() {
        let id = ChoiMatrix::identity(1);
        let x = choi_from_unitary(&crate::gates::pauli_x()).unwrap();
        assert!(matches!(exact_qpd(&id, &[("X".into(), x)]), Err(QpdError::NotInSpan(_))));
        assert!(exact_qpd(&id, &[]).is_err());
    }

    #[test]
    fn approximate_endpoints() {
        let u = linalg::identity(2);
        let target = ChoiMatrix::identity(1);
        let p = 0.1;
        let set = noisy_pauli_set(&u, p);
        let opt = (1.0 + p / 2.0) / (1.0 - p);
        let full = approximate_qpd(&target, &set, opt + 1e-6, PhysicalityFlags::NONE).unwrap();
        assert!(full.residual < 1e-6, "{}", full.residual);
        let one = approximate_qpd(&target, &set[..1], 1.0, PhysicalityFlags::NONE).unwrap();
        assert!((one.residual - 0.15).abs() < 1e-6);
        let zero = approximate_qpd(&target, &set, 0.0, PhysicalityFlags::NONE).unwrap();
        assert!(zero.coefficients().iter().all(|a| *a == 0.0));
        assert!((zero.residual - 1.0).abs() < 1e-6);
        let mid = approximate_qpd(&target, &set, 1.05, PhysicalityFlags::TPCP).unwrap();
        assert!(mid.gamma <= 1.05 + 1e-7);
        assert!(mid.residual < 0.15 && mid.residual > 0.0);
        assert!(crate::channel::is_tpcp(&mid.recombine(), 1e-6).is_tpcp());
    }

    #[test]
    fn min_gamma_meets_error() {
        let target = ChoiMatrix::identity(1);
        let set = noisy_pauli_set(&linalg::identity(2), 0.1);
        let q = min_gamma_qpd(&target, &set, 0.05, PhysicalityFlags::NONE).unwrap();
        assert!(q.residual <= 0.05 + 1e-7);
        assert!(q.gamma > 1.0 && q.gamma < (1.05 / 0.9));
    }

    #[test]
    fn curve_interpolation() {
        let c = TradeoffCurve::new("g", vec![(1.0, 0.2), (2.0, 0.0), (1.5, 0.1)]).unwrap();
        assert_eq!(c.eval(1.5).unwrap(), 0.1);
        assert!((c.eval(1.25).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(c.eval(3.0).unwrap(), 0.0);
        assert!(c.eval(0.5).is_err());
        assert!(c.to_csv().starts_with("gamma_budget,diamond_error\n"));
    }

    #[test]
    fn grid_spans_to_above_optimum() {
        let g = default_budget_grid(1.2);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 1.0);
        assert!((g[20] - 1.26).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
