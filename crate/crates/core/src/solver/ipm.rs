//! Infeasible-start primal-dual interior-point method (HKM direction,
//! Mehrotra predictor-corrector).

use nalgebra::{Cholesky, DVector, Dyn, SymmetricEigen};

use super::{Coeff, SemidefiniteProgram, SolveStatus, SolverSolution};
use crate::config::TOL;
use crate::linalg::RealMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_fraction: f64,
    /// Dual residual and gap accepted when the iteration limit is hit with
    /// the primal residual already within `tolerance`.
    pub acceptable_dual: f64,
    pub acceptable_gap: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self { tolerance: TOL.solver, max_iterations: 200, step_fraction: 0.95, acceptable_dual: 1e-6, acceptable_gap: 1e-7 }
    }
}

type Triplets = Vec<(usize, usize, f64)>;

struct Block {
    dim: usize,
    f0: RealMatrix,
    dense_vars: Vec<usize>,
    dense: Vec<RealMatrix>,
    /// Row `j` is the column-major vectorization of `dense[j]`.
    fvec: RealMatrix,
    sparse_vars: Vec<usize>,
    sparse: Vec<Triplets>,
}

impl Block {
    fn new(b: &super::PsdBlock) -> Self {
        let n = b.dim;
        let mut dense_vars = Vec::new();
        let mut dense = Vec::new();
        let mut sparse_vars = Vec::new();
        let mut sparse = Vec::new();
        for (k, coeff) in &b.terms {
            match coeff {
                Coeff::Dense(m) => {
                    dense_vars.push(*k);
                    dense.push(m.clone());
                }
                Coeff::Sparse(t) => {
                    sparse_vars.push(*k);
                    sparse.push(t.clone());
                }
            }
        }
        let mut fvec = RealMatrix::zeros(dense.len(), n * n);
        for (j, m) in dense.iter().enumerate() {
            for (idx, v) in m.as_slice().iter().enumerate() {
                fvec[(j, idx)] = *v;
            }
        }
        Self { dim: n, f0: b.constant.clone(), dense_vars, dense, fvec, sparse_vars, sparse }
    }

    /// `Σ_k y_k F_k`.
    fn apply(&self, y: &[f64]) -> RealMatrix {
        let n = self.dim;
        let mut out = if self.dense.is_empty() {
            RealMatrix::zeros(n, n)
        } else {
            let yd = DVector::from_iterator(self.dense_vars.len(), self.dense_vars.iter().map(|&k| y[k]));
            let v = self.fvec.tr_mul(&yd);
            RealMatrix::from_column_slice(n, n, v.as_slice())
        };
        for (k, t) in self.sparse_vars.iter().zip(&self.sparse) {
            let yk = y[*k];
            if yk != 0.0 {
                for &(r, c, v) in t {
                    out[(r, c)] += yk * v;
                }
            }
        }
        out
    }

    /// `out_k += ⟨F_k, M⟩`.
    fn adjoint(&self, m: &RealMatrix, out: &mut [f64]) {
        if !self.dense.is_empty() {
            let v = DVector::from_column_slice(m.as_slice());
            let a = &self.fvec * v;
            for (k, val) in self.dense_vars.iter().zip(a.iter()) {
                out[*k] += val;
            }
        }
        for (k, t) in self.sparse_vars.iter().zip(&self.sparse) {
            out[*k] += t.iter().map(|&(r, c, v)| v * m[(r, c)]).sum::<f64>();
        }
    }

    /// Adds `O_ij = ⟨F_i, S⁻¹ F_j X⟩` into `schur`.
    fn add_schur(&self, sinv: &RealMatrix, x: &RealMatrix, schur: &mut RealMatrix) {
        let n = self.dim;
        let nd = self.dense.len();
        let mut tmat = RealMatrix::zeros(nd, n * n);
        for (j, f) in self.dense.iter().enumerate() {
            let t = sinv * f * x;
            for (idx, v) in t.as_slice().iter().enumerate() {
                tmat[(j, idx)] = *v;
            }
        }
        if nd > 0 {
            let dd = &self.fvec * tmat.transpose();
            for (a, &i) in self.dense_vars.iter().enumerate() {
                for (b, &j) in self.dense_vars.iter().enumerate() {
                    schur[(i, j)] += dd[(a, b)];
                }
            }
        }
        for (i, ti) in self.sparse_vars.iter().zip(&self.sparse) {
            if nd > 0 {
                let mut row = DVector::<f64>::zeros(nd);
                for &(r, c, v) in ti {
                    row.axpy(v, &tmat.column(r + c * n), 1.0);
                }
                for (b, &j) in self.dense_vars.iter().enumerate() {
                    schur[(*i, j)] += row[b];
                    schur[(j, *i)] += row[b];
                }
            }
            for (j, tj) in self.sparse_vars.iter().zip(&self.sparse) {
                let mut acc = 0.0;
                for &(r, c, v) in ti {
                    for &(r2, c2, v2) in tj {
                        acc += v * v2 * sinv[(r, r2)] * x[(c2, c)];
                    }
                }
                schur[(*i, *j)] += acc;
            }
        }
    }
}

fn sym(m: &RealMatrix) -> RealMatrix {
    (m + m.transpose()) * 0.5
}

fn dot(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// Largest `α` with `M + α·D ⪰ 0`, given `M ≻ 0`.
fn max_step_psd(m: &RealMatrix, d: &RealMatrix) -> f64 {
    let Some(ch) = Cholesky::new(m.clone()) else { return 0.0 };
    let l = ch.l();
    let Some(a) = l.solve_lower_triangular(d) else { return 0.0 };
    let Some(b) = l.solve_lower_triangular(&a.transpose()) else { return 0.0 };
    let min = SymmetricEigen::new(sym(&b)).eigenvalues.min();
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

fn max_step_orthant(v: &[f64], dv: &[f64]) -> f64 {
    v.iter().zip(dv).filter(|(_, d)| **d < 0.0).map(|(x, d)| -x / d).fold(f64::INFINITY, f64::min)
}

fn cholesky_regularized(m: &RealMatrix) -> Option<Cholesky<f64, Dyn>> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch);
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut delta = 1e-14 * scale;
    while delta <= 1e-4 * scale {
        let mut reg = m.clone();
        for i in 0..m.nrows() {
            reg[(i, i)] += delta;
        }
        if let Some(ch) = Cholesky::new(reg) {
            return Some(ch);
        }
        delta *= 100.0;
    }
    None
}

struct Equalities {
    e: RealMatrix,
    f: DVector<f64>,
}

/// Orthonormal row-space reduction of `E y = f`; `None` when inconsistent.
fn reduce_equalities(p: &SemidefiniteProgram) -> Option<Equalities> {
    let m = p.n_vars;
    let rows = p.equalities.len();
    if rows == 0 {
        return Some(Equalities { e: RealMatrix::zeros(0, m), f: DVector::zeros(0) });
    }
    let mut e = RealMatrix::zeros(rows, m);
    let mut f = DVector::zeros(rows);
    for (i, row) in p.equalities.iter().enumerate() {
        for &(k, v) in &row.coeffs {
            e[(i, k)] += v;
        }
        f[i] = row.constant;
    }
    let svd = e.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return if f.amax() <= 1e-9 {
            Some(Equalities { e: RealMatrix::zeros(0, m), f: DVector::zeros(0) })
        } else {
            None
        };
    }
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax).collect();
    let mut er = RealMatrix::zeros(keep.len(), m);
    let mut fr = DVector::zeros(keep.len());
    let mut proj = DVector::zeros(rows);
    for (a, &i) in keep.iter().enumerate() {
        let s = svd.singular_values[i];
        er.row_mut(a).copy_from(&(vt.row(i) * s));
        let ui = u.column(i);
        let coef = ui.dot(&f);
        fr[a] = coef;
        proj.axpy(coef, &ui, 1.0);
    }
    if (&f - proj).norm() > 1e-9 * (1.0 + f.norm()) {
        return None;
    }
    Some(Equalities { e: er, f: fr })
}

enum Newton {
    Schur(Cholesky<f64, Dyn>),
    Kkt { kkt: RealMatrix, lu: nalgebra::LU<f64, Dyn, Dyn> },
}

struct Direction {
    dy: Vec<f64>,
    ds: Vec<RealMatrix>,
    dx: Vec<RealMatrix>,
    ds_o: Vec<f64>,
    dx_o: Vec<f64>,
    dlam: DVector<f64>,
}

pub(super) fn solve(p: &SemidefiniteProgram, settings: &IpmSettings) -> SolverSolution {
    let m = p.n_vars;
    let blocks: Vec<Block> = p.blocks.iter().map(Block::new).collect();
    let n_orth = p.inequalities.len();
    let h: Vec<f64> = p.inequalities.iter().map(|r| r.constant).collect();
    let c = DVector::from_column_slice(&p.cost);

    let Some(eqs) = reduce_equalities(p) else {
        return failed(p, SolveStatus::Infeasible, blocks.iter().map(|b| b.dim).collect());
    };
    let n_eq = eqs.e.nrows();

    let g_apply = |y: &[f64]| -> Vec<f64> {
        p.inequalities.iter().map(|r| r.coeffs.iter().map(|&(k, v)| v * y[k]).sum::<f64>()).collect()
    };
    let g_adjoint = |x: &[f64], out: &mut [f64]| {
        for (row, xi) in p.inequalities.iter().zip(x) {
            for &(k, v) in &row.coeffs {
                out[k] += v * xi;
            }
        }
    };
    let a_adjoint = |xs: &[RealMatrix], xo: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (b, x) in blocks.iter().zip(xs) {
            b.adjoint(x, &mut out);
        }
        g_adjoint(xo, &mut out);
        out
    };

    // Scaling of the starting point.
    let mut col_norm2 = vec![0.0; m];
    for b in &blocks {
        for (k, f) in b.dense_vars.iter().zip(&b.dense) {
            col_norm2[*k] += f.norm_squared();
        }
        for (k, t) in b.sparse_vars.iter().zip(&b.sparse) {
            col_norm2[*k] += t.iter().map(|e| e.2 * e.2).sum::<f64>();
        }
    }
    for row in &p.inequalities {
        for &(k, v) in &row.coeffs {
            col_norm2[k] += v * v;
        }
    }
    let n_total: usize = blocks.iter().map(|b| b.dim).sum::<usize>() + n_orth;
    let n_total_f = n_total.max(1) as f64;
    let data_norm = (blocks.iter().map(|b| b.f0.norm_squared()).sum::<f64>()
        + h.iter().map(|v| v * v).sum::<f64>())
    .sqrt();
    let max_col = col_norm2.iter().map(|v| v.sqrt()).fold(0.0, f64::max);
    let alpha = n_total_f
        * p.cost.iter().zip(&col_norm2).map(|(ck, nk)| (1.0 + ck.abs()) / (1.0 + nk.sqrt())).fold(0.0, f64::max).max(1.0 / n_total_f);
    let beta = (1.0 + max_col.max(data_norm)) / n_total_f.sqrt();
    let x0 = 10.0 * alpha;
    let s0 = 10.0 * beta;

    let mut y = vec![0.0; m];
    let mut xs: Vec<RealMatrix> = blocks.iter().map(|b| RealMatrix::identity(b.dim, b.dim) * x0).collect();
    let mut ss: Vec<RealMatrix> = blocks.iter().map(|b| RealMatrix::identity(b.dim, b.dim) * s0).collect();
    let mut xo = vec![x0; n_orth];
    let mut so = vec![s0; n_orth];
    let mut lam = DVector::<f64>::zeros(n_eq);

    let c_norm = c.norm();
    let f_norm = eqs.f.norm();
    let tol = settings.tolerance;

    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut stalled = 0;
    let (mut pinf, mut dinf, mut rgap);
    let (mut pobj, mut dobj);

    loop {
        // Residuals.
        let rp: Vec<RealMatrix> =
            blocks.iter().zip(&ss).map(|(b, s)| &b.f0 + b.apply(&y) - s).collect();
        let gy = g_apply(&y);
        let rp_o: Vec<f64> = (0..n_orth).map(|i| h[i] + gy[i] - so[i]).collect();
        let ey = &eqs.e * DVector::from_column_slice(&y);
        let re = &eqs.f - ey;
        let mut rd = c.clone() - DVector::from_vec(a_adjoint(&xs, &xo));
        if n_eq > 0 {
            rd -= eqs.e.tr_mul(&lam);
        }

        pobj = c.dot(&DVector::from_column_slice(&y));
        dobj = -blocks.iter().zip(&xs).map(|(b, x)| dot(&b.f0, x)).sum::<f64>()
            - h.iter().zip(&xo).map(|(a, b)| a * b).sum::<f64>()
            + eqs.f.dot(&lam);
        let compl = xs.iter().zip(&ss).map(|(x, s)| dot(x, s)).sum::<f64>()
            + xo.iter().zip(&so).map(|(a, b)| a * b).sum::<f64>();
        let mu = compl / n_total_f;

        let rp_norm = (rp.iter().map(|r| r.norm_squared()).sum::<f64>()
            + rp_o.iter().map(|v| v * v).sum::<f64>())
        .sqrt();
        pinf = (rp_norm / (1.0 + data_norm)).max(re.norm() / (1.0 + f_norm));
        dinf = rd.norm() / (1.0 + c_norm);
        let denom = 1.0 + pobj.abs() + dobj.abs();
        rgap = ((pobj - dobj).abs() / denom).max(compl.max(0.0) / denom);

        if pinf <= tol && dinf <= tol && rgap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        if iterations >= settings.max_iterations {
            break;
        }
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x_norm = xs.iter().map(|x| x.trace()).sum::<f64>() + xo.iter().sum::<f64>();
        if y_norm > 1e12 * (1.0 + data_norm) || x_norm > 1e12 * (1.0 + c_norm) * n_total_f {
            status = SolveStatus::Infeasible;
            break;
        }
        iterations += 1;

        // Schur complement.
        let mut sinvs = Vec::with_capacity(blocks.len());
        let mut ok = true;
        for s in &ss {
            match Cholesky::new(s.clone()) {
                Some(ch) => sinvs.push(sym(&ch.inverse())),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let mut schur = RealMatrix::zeros(m, m);
        for ((b, sinv), x) in blocks.iter().zip(&sinvs).zip(&xs) {
            b.add_schur(sinv, x, &mut schur);
        }
        let dgo: Vec<f64> = xo.iter().zip(&so).map(|(a, b)| a / b).collect();
        for (row, d) in p.inequalities.iter().zip(&dgo) {
            for &(k, v) in &row.coeffs {
                for &(l, w) in &row.coeffs {
                    schur[(k, l)] += d * v * w;
                }
            }
        }
        let schur = sym(&schur);
        let newton = if n_eq == 0 {
            match cholesky_regularized(&schur) {
                Some(ch) => Newton::Schur(ch),
                None => break,
            }
        } else {
            // [[M, Eᵀ], [E, 0]] [Δy; −Δλ] = [r; R_e]
            let size = m + n_eq;
            let mut kkt = RealMatrix::zeros(size, size);
            kkt.view_mut((0, 0), (m, m)).copy_from(&schur);
            kkt.view_mut((0, m), (m, n_eq)).copy_from(&eqs.e.transpose());
            kkt.view_mut((m, 0), (n_eq, m)).copy_from(&eqs.e);
            let lu = kkt.clone().lu();
            if !lu.is_invertible() {
                break;
            }
            Newton::Kkt { kkt, lu }
        };

        let solve_dir = |rc: &[RealMatrix], rc_o: &[f64]| -> Direction {
            let mut tmp: Vec<RealMatrix> = Vec::with_capacity(blocks.len());
            for (((r, sinv), x), rpb) in rc.iter().zip(&sinvs).zip(&xs).zip(&rp) {
                tmp.push(r - sinv * rpb * x);
            }
            let o_part: Vec<f64> = (0..n_orth).map(|i| rc_o[i] - dgo[i] * rp_o[i]).collect();
            let mut r = DVector::from_vec(a_adjoint(&tmp, &o_part));
            r -= &rd;
            let mut dlam = DVector::zeros(n_eq);
            let dy = match &newton {
                Newton::Schur(ch) => ch.solve(&r),
                Newton::Kkt { kkt, lu } => {
                    let mut rhs = DVector::zeros(m + n_eq);
                    rhs.rows_mut(0, m).copy_from(&r);
                    rhs.rows_mut(m, n_eq).copy_from(&re);
                    let mut sol = lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(m + n_eq));
                    for _ in 0..2 {
                        let resid = &rhs - kkt * &sol;
                        if let Some(corr) = lu.solve(&resid) {
                            sol += corr;
                        }
                    }
                    dlam = -sol.rows(m, n_eq).into_owned();
                    sol.rows(0, m).into_owned()
                }
            };
            let dy: Vec<f64> = dy.iter().copied().collect();
            let mut ds = Vec::with_capacity(blocks.len());
            let mut dx = Vec::with_capacity(blocks.len());
            for (i, b) in blocks.iter().enumerate() {
                let dsb = b.apply(&dy) + &rp[i];
                let dxb = sym(&(&rc[i] - &sinvs[i] * &dsb * &xs[i]));
                ds.push(dsb);
                dx.push(dxb);
            }
            let gdy = g_apply(&dy);
            let ds_o: Vec<f64> = (0..n_orth).map(|i| gdy[i] + rp_o[i]).collect();
            let dx_o: Vec<f64> = (0..n_orth).map(|i| rc_o[i] - dgo[i] * ds_o[i]).collect();
            Direction { dy, ds, dx, ds_o, dx_o, dlam }
        };

        let steps = |d: &Direction| -> (f64, f64) {
            let mut ax = max_step_orthant(&xo, &d.dx_o);
            let mut as_ = max_step_orthant(&so, &d.ds_o);
            for i in 0..blocks.len() {
                ax = ax.min(max_step_psd(&xs[i], &d.dx[i]));
                as_ = as_.min(max_step_psd(&ss[i], &d.ds[i]));
            }
            (ax, as_)
        };

        // Predictor.
        let rc_aff: Vec<RealMatrix> = xs.iter().map(|x| -x).collect();
        let rc_aff_o: Vec<f64> = xo.iter().map(|v| -v).collect();
        let aff = solve_dir(&rc_aff, &rc_aff_o);
        let (ax, as_) = steps(&aff);
        let (ax, as_) = (ax.min(1.0), as_.min(1.0));
        let mut compl_aff = 0.0;
        for i in 0..blocks.len() {
            compl_aff += dot(&(&xs[i] + &aff.dx[i] * ax), &(&ss[i] + &aff.ds[i] * as_));
        }
        for i in 0..n_orth {
            compl_aff += (xo[i] + ax * aff.dx_o[i]) * (so[i] + as_ * aff.ds_o[i]);
        }
        let mu_aff = compl_aff.max(0.0) / n_total_f;
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).min(1.0) } else { 0.0 };

        // Corrector.
        let target = sigma * mu;
        let rc: Vec<RealMatrix> = (0..blocks.len())
            .map(|i| &sinvs[i] * target - &xs[i] - sym(&(&sinvs[i] * &aff.ds[i] * &aff.dx[i])))
            .collect();
        let rc_o: Vec<f64> =
            (0..n_orth).map(|i| target / so[i] - xo[i] - aff.ds_o[i] * aff.dx_o[i] / so[i]).collect();
        let dir = solve_dir(&rc, &rc_o);
        let (ax, as_) = steps(&dir);
        let ax = (settings.step_fraction * ax).min(1.0);
        let as_ = (settings.step_fraction * as_).min(1.0);
        if ax < 1e-10 && as_ < 1e-10 {
            stalled += 1;
            if stalled >= 5 {
                break;
            }
        } else {
            stalled = 0;
        }

        for (k, v) in y.iter_mut().enumerate() {
            *v += as_ * dir.dy[k];
        }
        for i in 0..blocks.len() {
            ss[i] += &dir.ds[i] * as_;
            xs[i] += &dir.dx[i] * ax;
        }
        for i in 0..n_orth {
            so[i] += as_ * dir.ds_o[i];
            xo[i] += ax * dir.dx_o[i];
        }
        if n_eq > 0 {
            lam += &dir.dlam * ax;
        }
    }

    if status == SolveStatus::MaxIter && pinf <= tol && rgap <= settings.acceptable_gap && dinf <= settings.acceptable_dual {
        status = SolveStatus::Optimal;
    }

    let min_eig = blocks
        .iter()
        .map(|b| SymmetricEigen::new(sym(&(&b.f0 + b.apply(&y)))).eigenvalues.min())
        .fold(f64::INFINITY, f64::min);
    let eq_res = p
        .equalities
        .iter()
        .map(|r| (r.coeffs.iter().map(|&(k, v)| v * y[k]).sum::<f64>() - r.constant).abs())
        .fold(0.0, f64::max);
    let eq_duals = lam.iter().copied().collect();
    SolverSolution {
        status,
        x: y,
        objective: pobj,
        dual_objective: dobj,
        equality_residual: eq_res,
        primal_residual: pinf,
        dual_residual: dinf,
        relative_gap: rgap,
        min_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
        iterations,
        block_duals: xs,
        equality_duals: eq_duals,
    }
}

fn failed(p: &SemidefiniteProgram, status: SolveStatus, dims: Vec<usize>) -> SolverSolution {
    SolverSolution {
        status,
        x: vec![0.0; p.n_vars],
        objective: f64::NAN,
        dual_objective: f64::NAN,
        equality_residual: f64::INFINITY,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        relative_gap: f64::INFINITY,
        min_eigenvalue: f64::NAN,
        iterations: 0,
        block_duals: dims.into_iter().map(|d| RealMatrix::zeros(d, d)).collect(),
        equality_duals: Vec::new(),
    }
}
