//! Dense LP/SDP backend.
//!
//! Programs are stated in linear-matrix-inequality form over a real vector
//! `y ∈ R^m`:
//!
//! ```text
//! minimize    cᵀy
//! subject to  F0_b + Σ_k y_k F_bk ⪰ 0      for every PSD block b
//!             h + G y ≥ 0                   (orthant rows)
//!             E y = f
//! ```
//!
//! The conjugate program is solved simultaneously; its matrices are exposed
//! as [`SolverSolution::block_duals`]. Complex Hermitian data enter through
//! [`hermitian_embed`], see [`ComplexSdpBuilder`].

mod ipm;

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::error::{QpdError, Result};
use crate::linalg::{hermitian_deviation, ComplexMatrix, RealMatrix, C64};

pub use ipm::IpmSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Coefficient matrix of one variable in one PSD block.
#[derive(Debug, Clone, PartialEq)]
pub enum Coeff {
    /// Entries `(row, col, value)`; both triangles must be listed.
    Sparse(Vec<(usize, usize, f64)>),
    Dense(RealMatrix),
}

impl Coeff {
    pub fn to_dense(&self, dim: usize) -> RealMatrix {
        match self {
            Coeff::Dense(m) => m.clone(),
            Coeff::Sparse(t) => {
                let mut m = RealMatrix::zeros(dim, dim);
                for &(r, c, v) in t {
                    m[(r, c)] += v;
                }
                m
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub dim: usize,
    pub constant: RealMatrix,
    pub terms: Vec<(usize, Coeff)>,
}

/// One orthant row `h + Σ g_k y_k ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemidefiniteProgram {
    pub n_vars: usize,
    pub cost: Vec<f64>,
    pub blocks: Vec<PsdBlock>,
    pub inequalities: Vec<LinearRow>,
    /// Equality rows `Σ e_k y_k = f`.
    pub equalities: Vec<LinearRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSolution {
    pub status: SolveStatus,
    /// Optimal `y`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub equality_residual: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// Smallest eigenvalue over all slack blocks `F0 + F(y)`.
    pub min_eigenvalue: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub block_duals: Vec<RealMatrix>,
    #[serde(skip)]
    pub equality_duals: Vec<f64>,
}

impl SolverSolution {
    pub fn require_optimal(self, what: &str) -> Result<Self> {
        if self.status == SolveStatus::Optimal {
            Ok(self)
        } else {
            Err(QpdError::Solver {
                status: self.status,
                detail: format!(
                    "{what}: {} iterations, primal {:.2e}, dual {:.2e}, gap {:.2e}",
                    self.iterations, self.primal_residual, self.dual_residual, self.relative_gap
                ),
            })
        }
    }
}

impl SemidefiniteProgram {
    pub fn new(n_vars: usize) -> Self {
        Self { n_vars, cost: vec![0.0; n_vars], blocks: Vec::new(), inequalities: Vec::new(), equalities: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QpdError::InvalidInput(msg));
        if self.cost.len() != self.n_vars {
            return bad(format!("cost has {} entries for {} variables", self.cost.len(), self.n_vars));
        }
        if self.cost.iter().any(|v| !v.is_finite()) {
            return bad("non-finite cost".into());
        }
        for (b, block) in self.blocks.iter().enumerate() {
            let d = block.dim;
            if block.constant.shape() != (d, d) {
                return bad(format!("block {b}: constant has wrong shape"));
            }
            if asym(&block.constant) > 1e-12 * (1.0 + block.constant.amax()) {
                return bad(format!("block {b}: constant is not symmetric"));
            }
            for (k, coeff) in &block.terms {
                if *k >= self.n_vars {
                    return bad(format!("block {b}: variable {k} out of range"));
                }
                match coeff {
                    Coeff::Dense(m) => {
                        if m.shape() != (d, d) || asym(m) > 1e-12 * (1.0 + m.amax()) {
                            return bad(format!("block {b}: coefficient of variable {k} malformed"));
                        }
                    }
                    Coeff::Sparse(t) => {
                        if t.iter().any(|&(r, c, v)| r >= d || c >= d || !v.is_finite()) {
                            return bad(format!("block {b}: sparse coefficient of variable {k} out of range"));
                        }
                        if asym(&coeff.to_dense(d)) > 1e-12 {
                            return bad(format!("block {b}: coefficient of variable {k} not symmetric"));
                        }
                    }
                }
            }
        }
        for row in self.inequalities.iter().chain(&self.equalities) {
            if row.coeffs.iter().any(|&(k, v)| k >= self.n_vars || !v.is_finite()) || !row.constant.is_finite() {
                return bad("linear row references an unknown variable or holds non-finite data".into());
            }
        }
        Ok(())
    }

    /// Plain-text dump for cross-checking with external solvers.
    ///
    /// ```text
    /// qpd-sdp 1
    /// vars <m>
    /// cost <c_0> ... <c_{m-1}>
    /// block <b> <dim>
    /// F0 <row> <col> <value>              (upper triangle, nonzeros)
    /// F <var> <row> <col> <value>         (upper triangle, nonzeros)
    /// ineq <h> <var>:<g> ...
    /// eq <f> <var>:<e> ...
    /// ```
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "qpd-sdp 1");
        let _ = writeln!(s, "vars {}", self.n_vars);
        let _ = write!(s, "cost");
        for c in &self.cost {
            let _ = write!(s, " {c:.17e}");
        }
        let _ = writeln!(s);
        for (b, block) in self.blocks.iter().enumerate() {
            let _ = writeln!(s, "block {b} {}", block.dim);
            for r in 0..block.dim {
                for c in r..block.dim {
                    let v = block.constant[(r, c)];
                    if v != 0.0 {
                        let _ = writeln!(s, "F0 {r} {c} {v:.17e}");
                    }
                }
            }
            for (k, coeff) in &block.terms {
                let m = coeff.to_dense(block.dim);
                for r in 0..block.dim {
                    for c in r..block.dim {
                        let v = m[(r, c)];
                        if v != 0.0 {
                            let _ = writeln!(s, "F {k} {r} {c} {v:.17e}");
                        }
                    }
                }
            }
        }
        for (tag, rows) in [("ineq", &self.inequalities), ("eq", &self.equalities)] {
            for row in rows {
                let _ = write!(s, "{tag} {:.17e}", row.constant);
                for (k, v) in &row.coeffs {
                    let _ = write!(s, " {k}:{v:.17e}");
                }
                let _ = writeln!(s);
            }
        }
        w.write_all(s.as_bytes())
    }
}

fn asym(m: &RealMatrix) -> f64 {
    (m - m.transpose()).amax()
}

pub fn solve_sdp(p: &SemidefiniteProgram) -> Result<SolverSolution> {
    solve_sdp_with(p, &IpmSettings::default())
}

pub fn solve_sdp_with(p: &SemidefiniteProgram, settings: &IpmSettings) -> Result<SolverSolution> {
    p.validate()?;
    Ok(ipm::solve(p, settings))
}

/// `minimize cᵀx  s.t.  A_eq x = b_eq,  A_ub x ≤ b_ub,  lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ub_matrix: Vec<Vec<f64>>,
    pub ub_rhs: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    /// All variables nonnegative, no other constraints yet.
    pub fn nonnegative(cost: Vec<f64>) -> Self {
        let n = cost.len();
        Self { cost, lower: vec![Some(0.0); n], upper: vec![None; n], ..Default::default() }
    }

    fn to_sdp(&self) -> Result<SemidefiniteProgram> {
        let n = self.cost.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(QpdError::Dimension("LP bounds do not match the cost vector".into()));
        }
        if self.eq_matrix.len() != self.eq_rhs.len() || self.ub_matrix.len() != self.ub_rhs.len() {
            return Err(QpdError::Dimension("LP constraint rows do not match right-hand sides".into()));
        }
        if self.eq_matrix.iter().chain(&self.ub_matrix).any(|r| r.len() != n) {
            return Err(QpdError::Dimension("LP constraint row has wrong length".into()));
        }
        let sparse = |row: &[f64], sign: f64| -> Vec<(usize, f64)> {
            row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| (k, sign * v)).collect()
        };
        let mut p = SemidefiniteProgram::new(n);
        p.cost = self.cost.clone();
        for (row, b) in self.eq_matrix.iter().zip(&self.eq_rhs) {
            p.equalities.push(LinearRow { coeffs: sparse(row, 1.0), constant: *b });
        }
        for (row, b) in self.ub_matrix.iter().zip(&self.ub_rhs) {
            p.inequalities.push(LinearRow { coeffs: sparse(row, -1.0), constant: *b });
        }
        for k in 0..n {
            if let Some(l) = self.lower[k] {
                p.inequalities.push(LinearRow { coeffs: vec![(k, 1.0)], constant: -l });
            }
            if let Some(u) = self.upper[k] {
                p.inequalities.push(LinearRow { coeffs: vec![(k, -1.0)], constant: u });
            }
        }
        Ok(p)
    }
}

pub fn solve_lp(p: &LinearProgram) -> Result<SolverSolution> {
    solve_sdp(&p.to_sdp()?)
}

/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn hermitian_embed(h: &ComplexMatrix) -> Result<RealMatrix> {
    let dev = hermitian_deviation(h);
    if dev > crate::config::TOL.hermitian * (1.0 + h.iter().map(|z| z.norm()).fold(0.0, f64::max)) {
        return Err(QpdError::NotHermitian(dev));
    }
    Ok(embed_unchecked(h))
}

pub(crate) fn embed_unchecked(h: &ComplexMatrix) -> RealMatrix {
    let d = h.nrows();
    let mut m = RealMatrix::zeros(2 * d, 2 * d);
    for r in 0..d {
        for c in 0..d {
            let z = h[(r, c)];
            m[(r, c)] = z.re;
            m[(r + d, c + d)] = z.re;
            m[(r, c + d)] = -z.im;
            m[(r + d, c)] = z.im;
        }
    }
    m
}

fn embed_sparse(entries: &[(usize, usize, C64)], d: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(4 * entries.len());
    for &(r, c, z) in entries {
        if z.re != 0.0 {
            out.push((r, c, z.re));
            out.push((r + d, c + d, z.re));
        }
        if z.im != 0.0 {
            out.push((r, c + d, -z.im));
            out.push((r + d, c, z.im));
        }
    }
    out
}

/// Handle to a Hermitian matrix variable created by [`ComplexSdpBuilder::hermitian_var`].
#[derive(Debug, Clone)]
pub struct HermitianVar {
    pub dim: usize,
    /// Real coordinates with the sparse complex basis matrix each one multiplies.
    pub coords: Vec<(usize, Vec<(usize, usize, C64)>)>,
}

impl HermitianVar {
    pub fn value(&self, y: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for (k, entries) in &self.coords {
            for &(r, c, z) in entries {
                m[(r, c)] += z * y[*k];
            }
        }
        m
    }
}

/// Index of a complex Hermitian LMI inside a builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockId(usize);

/// Builds an LMI-form program whose PSD constraints are complex Hermitian.
#[derive(Debug, Clone)]
pub struct ComplexSdpBuilder {
    n_vars: usize,
    cost: Vec<f64>,
    blocks: Vec<(usize, ComplexMatrix, Vec<(usize, Coeff)>)>,
    inequalities: Vec<LinearRow>,
    equalities: Vec<LinearRow>,
}

impl Default for ComplexSdpBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ComplexSdpBuilder {
    pub fn new() -> Self {
        Self { n_vars: 0, cost: Vec::new(), blocks: Vec::new(), inequalities: Vec::new(), equalities: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn scalar(&mut self, cost: f64) -> usize {
        self.cost.push(cost);
        self.n_vars += 1;
        self.n_vars - 1
    }

    /// Hermitian `dim × dim` variable: real diagonal, then real and
    /// imaginary parts of the upper triangle.
    pub fn hermitian_var(&mut self, dim: usize) -> HermitianVar {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let mut coords = Vec::with_capacity(dim * dim);
        for k in 0..dim {
            coords.push((self.scalar(0.0), vec![(k, k, one)]));
        }
        for r in 0..dim {
            for c in r + 1..dim {
                coords.push((self.scalar(0.0), vec![(r, c, one), (c, r, one)]));
                coords.push((self.scalar(0.0), vec![(r, c, i), (c, r, -i)]));
            }
        }
        HermitianVar { dim, coords }
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    /// New LMI `constant + Σ … ⪰ 0` of complex side `dim`.
    pub fn block(&mut self, constant: ComplexMatrix) -> BlockId {
        let d = constant.nrows();
        self.blocks.push((d, constant, Vec::new()));
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_dense(&mut self, b: BlockId, var: usize, coeff: &ComplexMatrix) {
        let m = embed_unchecked(coeff);
        self.blocks[b.0].2.push((var, Coeff::Dense(m)));
    }

    pub fn add_sparse(&mut self, b: BlockId, var: usize, entries: &[(usize, usize, C64)]) {
        let d = self.blocks[b.0].0;
        self.blocks[b.0].2.push((var, Coeff::Sparse(embed_sparse(entries, d))));
    }

    /// Adds `scale · M(h)` where `M` is the map `entries ↦ entries` applied to
    /// the Hermitian variable, optionally after a linear map on each basis matrix.
    pub fn add_hermitian<F>(&mut self, b: BlockId, h: &HermitianVar, scale: f64, mut map: F)
    where
        F: FnMut(&[(usize, usize, C64)]) -> Vec<(usize, usize, C64)>,
    {
        for (k, entries) in &h.coords {
            let mapped: Vec<_> = map(entries).into_iter().map(|(r, c, z)| (r, c, z * scale)).collect();
            self.add_sparse(b, *k, &mapped);
        }
    }

    pub fn add_identity(&mut self, b: BlockId, var: usize, scale: f64) {
        let d = self.blocks[b.0].0;
        let entries: Vec<_> = (0..d).map(|k| (k, k, C64::new(scale, 0.0))).collect();
        self.add_sparse(b, var, &entries);
    }

    pub fn inequality(&mut self, coeffs: Vec<(usize, f64)>, constant: f64) {
        self.inequalities.push(LinearRow { coeffs, constant });
    }

    pub fn equality(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(LinearRow { coeffs, constant: rhs });
    }

    pub fn build(self) -> SemidefiniteProgram {
        let blocks = self
            .blocks
            .into_iter()
            .map(|(d, constant, terms)| PsdBlock { dim: 2 * d, constant: embed_unchecked(&constant), terms })
            .collect();
        SemidefiniteProgram {
            n_vars: self.n_vars,
            cost: self.cost,
            blocks,
            inequalities: self.inequalities,
            equalities: self.equalities,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, from_rows, random_density, I as IM, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lp_single_bound() {
        let mut lp = LinearProgram { cost: vec![1.0], lower: vec![Some(3.0)], upper: vec![None], ..Default::default() };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-7, "{:?}", sol.x);
        lp.cost = vec![10.0];
        let scaled = solve_lp(&lp).unwrap();
        assert!((scaled.objective - 10.0 * sol.objective).abs() < 1e-8 * scaled.objective.abs());
    }

    #[test]
    fn lp_split_absolute_value() {
        let mut lp = LinearProgram::nonnegative(vec![1.0, 1.0]);
        lp.eq_matrix = vec![vec![1.0, -1.0]];
        lp.eq_rhs = vec![1.0];
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-7);
        assert!((sol.x[0] - sol.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lp_infeasible_is_reported() {
        let mut lp = LinearProgram::nonnegative(vec![1.0]);
        lp.eq_matrix = vec![vec![1.0]];
        lp.eq_rhs = vec![-1.0];
        let sol = solve_lp(&lp).unwrap();
        assert_ne!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn lp_inconsistent_equalities() {
        let mut lp = LinearProgram::nonnegative(vec![1.0, 1.0]);
        lp.eq_matrix = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        lp.eq_rhs = vec![1.0, 3.0];
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn sdp_max_trace() {
        // maximize tr X, X ⪰ 0 (2×2), tr X ≤ 1; X parametrized by 3 reals.
        let mut p = SemidefiniteProgram::new(3);
        p.cost = vec![-1.0, -1.0, 0.0];
        p.blocks.push(PsdBlock {
            dim: 2,
            constant: RealMatrix::zeros(2, 2),
            terms: vec![
                (0, Coeff::Sparse(vec![(0, 0, 1.0)])),
                (1, Coeff::Sparse(vec![(1, 1, 1.0)])),
                (2, Coeff::Sparse(vec![(0, 1, 1.0), (1, 0, 1.0)])),
            ],
        });
        p.inequalities.push(LinearRow { coeffs: vec![(0, -1.0), (1, -1.0)], constant: 1.0 });
        let sol = solve_sdp(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-7);
        // Any maximizer value is bounded by the dual certificate 1 (λ = 1).
        assert!(-sol.objective <= 1.0 + 1e-8);
    }

    #[test]
    fn sdp_is_deterministic() {
        let mut p = SemidefiniteProgram::new(1);
        p.cost = vec![1.0];
        p.blocks.push(PsdBlock {
            dim: 2,
            constant: RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            terms: vec![(0, Coeff::Dense(RealMatrix::identity(2, 2)))],
        });
        let a = solve_sdp(&p).unwrap();
        let b = solve_sdp(&p).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.iterations, b.iterations);
        assert!((a.x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn embed_identity_and_pauli_y() {
        assert_eq!(hermitian_embed(&linalg::identity(2)).unwrap(), RealMatrix::identity(4, 4));
        let y = from_rows(&[&[ZERO, -IM], &[IM, ZERO]]);
        let e = hermitian_embed(&y).unwrap();
        assert!((&e - e.transpose()).amax() < 1e-15);
        let mut vals: Vec<f64> = e.symmetric_eigenvalues().iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        for (v, t) in vals.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((v - t).abs() < 1e-12);
        }
        assert!(hermitian_embed(&from_rows(&[&[ZERO, IM], &[IM, ZERO]])).is_err());
    }

    #[test]
    fn embed_preserves_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rho = random_density(4, &mut rng);
            let e = hermitian_embed(&rho).unwrap();
            let min = e.symmetric_eigenvalues().min();
            assert!(min >= -1e-12);
        }
    }

    #[test]
    fn dump_lists_every_block() {
        let mut p = SemidefiniteProgram::new(1);
        p.cost = vec![1.0];
        p.blocks.push(PsdBlock { dim: 1, constant: RealMatrix::zeros(1, 1), terms: vec![(0, Coeff::Sparse(vec![(0, 0, 1.0)]))] });
        let mut buf = Vec::new();
        p.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("qpd-sdp 1\nvars 1\n"));
        assert!(text.contains("block 0 1"));
        assert!(text.contains("F 0 0 0 1.00000000000000000e0"));
    }
}
