//! Choi-matrix representation of linear maps on qubit registers.
//!
//! # Convention
//!
//! For a map `E` from `n_in` to `n_out` qubits with `d_in = 2^n_in`,
//!
//! ```text
//! Λ = (1/d_in) Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|)
//! ```
//!
//! i.e. the input reference system is the first Kronecker factor and the
//! output system the second. A trace-preserving map has `tr Λ = 1` and
//! `tr₂ Λ = I / d_in`, where `tr₂` traces out the output factor. The
//! unnormalized Choi matrix used by some references is `d_in · Λ`.

use serde::{Deserialize, Serialize};

use crate::config::TOL;
use crate::error::{QpdError, Result};
use crate::linalg::{
    self, c, eigh, frobenius, hermitian_deviation, ComplexMatrix, C64, ONE, ZERO,
};

/// A density matrix on a qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and unit trace.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_qubit_dim(matrix.nrows(), matrix.ncols())?;
        let herm = hermitian_deviation(&matrix);
        if herm > TOL.hermitian {
            return Err(QpdError::NotHermitian(herm));
        }
        let min_eig = linalg::min_eigenvalue(&matrix);
        if min_eig < -TOL.density_psd {
            return Err(QpdError::InvalidInput(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > TOL.density_trace {
            return Err(QpdError::InvalidInput(format!("density matrix trace {tr}")));
        }
        Ok(Self { matrix })
    }

    /// Pure state `|ψ⟩⟨ψ|`; the vector is normalized first.
    pub fn pure(state: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(state);
        let nrm = v.norm();
        if nrm == 0.0 {
            return Err(QpdError::InvalidInput("zero state vector".into()));
        }
        let v = v.unscale(nrm);
        Self::new(&v * v.adjoint())
    }

    /// `|0…0⟩⟨0…0|` on `n_qubits`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        let mut m = ComplexMatrix::zeros(d, d);
        m[(0, 0)] = ONE;
        Self { matrix: m }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self { matrix: linalg::identity(d).unscale(d as f64) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }
}

/// Number of Choi eigenvalues above the rank cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelRank(pub usize);

/// Normalized Choi matrix of a linear map between qubit registers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    n_in: usize,
    n_out: usize,
    matrix: ComplexMatrix,
}

/// Physicality diagnostics reported by [`is_tpcp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TpcpVerdict {
    pub completely_positive: bool,
    pub trace_preserving: bool,
    pub min_eigenvalue: f64,
    /// Largest entrywise deviation of `tr₂ Λ` from `I / d_in`.
    pub tp_deviation: f64,
    pub hermitian_deviation: f64,
}

impl TpcpVerdict {
    pub fn is_tpcp(&self) -> bool {
        self.completely_positive && self.trace_preserving
    }
}

fn check_qubit_dim(rows: usize, cols: usize) -> Result<()> {
    if rows != cols || !rows.is_power_of_two() || rows == 0 {
        return Err(QpdError::Dimension(format!(
            "expected a square matrix with power-of-two side, got {rows}×{cols}"
        )));
    }
    Ok(())
}

impl ChoiMatrix {
    pub fn from_matrix(n_in: usize, n_out: usize, matrix: ComplexMatrix) -> Result<Self> {
        let side = 1usize << (n_in + n_out);
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(QpdError::Dimension(format!(
                "Choi matrix for {n_in}→{n_out} qubits must be {side}×{side}, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { n_in, n_out, matrix })
    }

    pub fn zero(n_in: usize, n_out: usize) -> Self {
        let side = 1usize << (n_in + n_out);
        Self { n_in, n_out, matrix: ComplexMatrix::zeros(side, side) }
    }

    pub fn identity(n_qubits: usize) -> Self {
        choi_from_unitary(&linalg::identity(1 << n_qubits)).expect("identity is unitary")
    }

    /// `D_p(ρ) = (1 − p) ρ + p · tr(ρ) I / 2^n`.
    pub fn depolarizing(n_qubits: usize, p: f64) -> Self {
        let d = 1usize << n_qubits;
        let id = Self::identity(n_qubits);
        let full = linalg::identity(d * d).unscale((d * d) as f64);
        Self { n_in: n_qubits, n_out: n_qubits, matrix: id.matrix.scale(1.0 - p) + full.scale(p) }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn d_in(&self) -> usize {
        1 << self.n_in
    }

    pub fn d_out(&self) -> usize {
        1 << self.n_out
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    /// `tr₂ Λ`: trace over the output factor, an operator on the input space.
    pub fn marginal(&self) -> ComplexMatrix {
        linalg::partial_trace_second(&self.matrix, self.d_in(), self.d_out())
    }

    /// Largest entrywise deviation of the marginal from `scale · I / d_in`.
    pub fn marginal_deviation(&self, scale: f64) -> f64 {
        let d = self.d_in();
        let m = self.marginal();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { scale / d as f64 } else { 0.0 };
                worst = worst.max((m[(i, j)] - c(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn same_shape(&self, other: &ChoiMatrix) -> bool {
        self.n_in == other.n_in && self.n_out == other.n_out
    }

    fn check_same_shape(&self, other: &ChoiMatrix) -> Result<()> {
        if !self.same_shape(other) {
            return Err(QpdError::Dimension(format!(
                "Choi shapes differ: {}→{} vs {}→{}",
                self.n_in, self.n_out, other.n_in, other.n_out
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { n_in: self.n_in, n_out: self.n_out, matrix: self.matrix.scale(alpha) }
    }

    pub fn add(&self, other: &ChoiMatrix) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self { n_in: self.n_in, n_out: self.n_out, matrix: &self.matrix + &other.matrix })
    }

    pub fn sub(&self, other: &ChoiMatrix) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self { n_in: self.n_in, n_out: self.n_out, matrix: &self.matrix - &other.matrix })
    }

    /// `Σ a_k Λ_k`. Fails on an empty list.
    pub fn linear_combination<'a, I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a ChoiMatrix)>,
    {
        let mut acc: Option<ChoiMatrix> = None;
        for (a, ch) in terms {
            match acc.as_mut() {
                None => acc = Some(ch.scaled(a)),
                Some(sum) => {
                    sum.check_same_shape(ch)?;
                    sum.matrix.zip_apply(&ch.matrix, |x, y| *x += y * a);
                }
            }
        }
        acc.ok_or_else(|| QpdError::InvalidInput("empty linear combination".into()))
    }

    /// Frobenius distance between Choi matrices.
    pub fn distance(&self, other: &ChoiMatrix) -> f64 {
        frobenius(&(&self.matrix - &other.matrix))
    }

    /// Superoperator acting on row-major vectorized operators:
    /// `vec(E(ρ))[a·d_out + b] = Σ S[(a,b),(i,j)] ρ[i,j]`.
    pub fn superoperator(&self) -> ComplexMatrix {
        let (di, dout) = (self.d_in(), self.d_out());
        let scale = di as f64;
        ComplexMatrix::from_fn(dout * dout, di * di, |row, col| {
            let (a, b) = (row / dout, row % dout);
            let (i, j) = (col / di, col % di);
            self.matrix[(i * dout + a, j * dout + b)] * scale
        })
    }

    pub fn from_superoperator(n_in: usize, n_out: usize, s: &ComplexMatrix) -> Result<Self> {
        let (di, dout) = (1usize << n_in, 1usize << n_out);
        if s.nrows() != dout * dout || s.ncols() != di * di {
            return Err(QpdError::Dimension("superoperator shape".into()));
        }
        let inv = 1.0 / di as f64;
        let side = di * dout;
        let m = ComplexMatrix::from_fn(side, side, |r, col| {
            let (i, a) = (r / dout, r % dout);
            let (j, b) = (col / dout, col % dout);
            s[(a * dout + b, i * di + j)] * inv
        });
        Ok(Self { n_in, n_out, matrix: m })
    }

    /// Stable, documented JSON form.
    pub fn to_json(&self) -> ChoiJson {
        let side = self.matrix.nrows();
        let re = (0..side).map(|i| (0..side).map(|j| self.matrix[(i, j)].re).collect()).collect();
        let im = (0..side).map(|i| (0..side).map(|j| self.matrix[(i, j)].im).collect()).collect();
        ChoiJson { n_in: self.n_in, n_out: self.n_out, convention: CONVENTION.to_string(), re, im }
    }

    pub fn from_json(j: &ChoiJson) -> Result<Self> {
        if j.convention != CONVENTION {
            return Err(QpdError::InvalidInput(format!("unsupported Choi convention `{}`", j.convention)));
        }
        let side = 1usize << (j.n_in + j.n_out);
        if j.re.len() != side || j.im.len() != side || j.re.iter().chain(&j.im).any(|r| r.len() != side) {
            return Err(QpdError::Dimension("Choi JSON arrays have wrong shape".into()));
        }
        let m = ComplexMatrix::from_fn(side, side, |r, col| c(j.re[r][col], j.im[r][col]));
        Self::from_matrix(j.n_in, j.n_out, m)
    }
}

pub const CONVENTION: &str = "trace1";

/// JSON object `{n_in, n_out, convention, re, im}` with row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiJson {
    pub n_in: usize,
    pub n_out: usize,
    pub convention: String,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Choi matrix of `ρ ↦ Σ_k K_k ρ K_k†`. Trace-non-increasing families are
/// accepted (postselection); trace-increasing ones are rejected.
pub fn choi_from_kraus(kraus: &[ComplexMatrix]) -> Result<ChoiMatrix> {
    let first = kraus.first().ok_or_else(|| QpdError::InvalidInput("no Kraus operators".into()))?;
    let (dout, di) = first.shape();
    if !di.is_power_of_two() || !dout.is_power_of_two() {
        return Err(QpdError::Dimension(format!("Kraus operator shape {dout}×{di}")));
    }
    if kraus.iter().any(|k| k.shape() != (dout, di)) {
        return Err(QpdError::Dimension("Kraus operators have different shapes".into()));
    }
    let mut gram = ComplexMatrix::zeros(di, di);
    for k in kraus {
        gram += k.adjoint() * k;
    }
    let excess = linalg::eigvalsh(&gram).last().copied().unwrap_or(0.0) - 1.0;
    if excess > TOL.kraus_excess {
        return Err(QpdError::TraceIncreasing(excess));
    }
    let side = di * dout;
    let mut m = ComplexMatrix::zeros(side, side);
    for k in kraus {
        let v = nalgebra::DVector::from_fn(side, |r, _| k[(r % dout, r / dout)]);
        m += &v * v.adjoint();
    }
    let n_in = di.trailing_zeros() as usize;
    let n_out = dout.trailing_zeros() as usize;
    Ok(ChoiMatrix { n_in, n_out, matrix: m.unscale(di as f64) })
}

pub fn choi_from_unitary(u: &ComplexMatrix) -> Result<ChoiMatrix> {
    let dev = linalg::unitary_deviation(u);
    if dev > TOL.unitary {
        return Err(QpdError::NotUnitary(dev));
    }
    choi_from_kraus(std::slice::from_ref(u))
}

/// Choi matrix of `ρ ↦ A ρ A†` for an arbitrary (trace-non-increasing) operator.
pub fn choi_from_operator(a: &ComplexMatrix) -> Result<ChoiMatrix> {
    choi_from_kraus(std::slice::from_ref(a))
}

/// Canonical Kraus operators of a CP map from the eigendecomposition of its
/// Choi matrix; eigenvalues at or below `cutoff` are dropped.
pub fn kraus_from_choi(choi: &ChoiMatrix, cutoff: f64) -> Vec<ComplexMatrix> {
    let (di, dout) = (choi.d_in(), choi.d_out());
    let (vals, vecs) = eigh(&choi.matrix);
    let mut out = Vec::new();
    for (k, &lam) in vals.iter().enumerate().rev() {
        if lam <= cutoff {
            continue;
        }
        let s = (lam * di as f64).sqrt();
        out.push(ComplexMatrix::from_fn(dout, di, |a, i| vecs[(i * dout + a, k)] * s));
    }
    out
}

/// Nearest trace-preserving channel with at most `max_rank` Kraus operators:
/// the dominant Kraus operators are stacked into `V` and replaced by the
/// polar factor of `V`.
pub fn project_trace_preserving(choi: &ChoiMatrix, max_rank: usize) -> Result<ChoiMatrix> {
    let (di, dout) = (choi.d_in(), choi.d_out());
    let mut kraus = kraus_from_choi(choi, 0.0);
    kraus.truncate(max_rank.max(1));
    if kraus.is_empty() {
        return Err(QpdError::NotCompletelyPositive(linalg::min_eigenvalue(&choi.matrix)));
    }
    let k = kraus.len();
    let mut v = ComplexMatrix::zeros(k * dout, di);
    for (i, op) in kraus.iter().enumerate() {
        v.view_mut((i * dout, 0), (dout, di)).copy_from(op);
    }
    let w = linalg::nearest_isometry(&v);
    let ops: Vec<ComplexMatrix> = (0..k).map(|i| w.view((i * dout, 0), (dout, di)).into_owned()).collect();
    choi_from_kraus(&ops)
}

/// `E(ρ)` for the map with Choi matrix `Λ`. `ρ` need not be a state.
pub fn apply_channel(choi: &ChoiMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (di, dout) = (choi.d_in(), choi.d_out());
    if rho.shape() != (di, di) {
        return Err(QpdError::Dimension(format!(
            "channel expects {di}×{di} input, got {}×{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let scale = di as f64;
    let mut out = ComplexMatrix::zeros(dout, dout);
    for i in 0..di {
        for j in 0..di {
            let r = rho[(i, j)];
            if r == ZERO {
                continue;
            }
            for a in 0..dout {
                for b in 0..dout {
                    out[(a, b)] += choi.matrix[(i * dout + a, j * dout + b)] * r;
                }
            }
        }
    }
    Ok(out.scale(scale))
}

/// Applies a channel on `qubits` of an `n_qubits` register operator.
pub fn apply_channel_on(
    choi: &ChoiMatrix,
    rho: &ComplexMatrix,
    qubits: &[usize],
    n_qubits: usize,
) -> Result<ComplexMatrix> {
    let side = 1usize << n_qubits;
    if rho.shape() != (side, side) {
        return Err(QpdError::Dimension(format!("expected {side}×{side} register operator")));
    }
    if choi.n_in != choi.n_out || choi.n_in != qubits.len() {
        return Err(QpdError::Dimension(format!(
            "{}→{} channel cannot act on {} qubits",
            choi.n_in,
            choi.n_out,
            qubits.len()
        )));
    }
    let mut mask = 0usize;
    for &q in qubits {
        if q >= n_qubits || mask & (1 << q) != 0 {
            return Err(QpdError::InvalidInput(format!("invalid qubit list {qubits:?}")));
        }
        mask |= 1 << q;
    }
    let d = choi.d_in();
    let scale = d as f64;
    let rests: Vec<usize> = (0..side).filter(|r| r & mask == 0).collect();
    let spread: Vec<usize> = (0..d).map(|l| linalg::scatter_bits(l, qubits)).collect();
    let mut out = ComplexMatrix::zeros(side, side);
    for &rr in &rests {
        for &rc in &rests {
            for i in 0..d {
                for j in 0..d {
                    let r = rho[(spread[i] | rr, spread[j] | rc)];
                    if r == ZERO {
                        continue;
                    }
                    for a in 0..d {
                        for b in 0..d {
                            out[(spread[a] | rr, spread[b] | rc)] += choi.matrix[(i * d + a, j * d + b)] * r * scale;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Apply to a density matrix; the result is returned as a plain matrix since
/// non-trace-preserving maps produce subnormalized outputs.
pub fn apply_to_state(choi: &ChoiMatrix, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    apply_channel(choi, rho.matrix())
}

/// `second ∘ first`.
pub fn compose(second: &ChoiMatrix, first: &ChoiMatrix) -> Result<ChoiMatrix> {
    if first.n_out != second.n_in {
        return Err(QpdError::Dimension(format!(
            "cannot compose: first outputs {} qubits, second expects {}",
            first.n_out, second.n_in
        )));
    }
    let s = second.superoperator() * first.superoperator();
    ChoiMatrix::from_superoperator(first.n_in, second.n_out, &s)
}

/// Tensor product `E_a ⊗ E_b` with `a` acting on the low-order qubits and
/// `b` on the qubits above them.
pub fn tensor(a: &ChoiMatrix, b: &ChoiMatrix) -> ChoiMatrix {
    let (ai, ao, bi, bo) = (a.d_in(), a.d_out(), b.d_in(), b.d_out());
    let (di, dout) = (ai * bi, ao * bo);
    let side = di * dout;
    let mut m = ComplexMatrix::zeros(side, side);
    for r in 0..side {
        let (ii, aa) = (r / dout, r % dout);
        let ra = (ii % ai) * ao + aa % ao;
        let rb = (ii / ai) * bo + aa / ao;
        for col in 0..side {
            let (jj, bb) = (col / dout, col % dout);
            let ca = (jj % ai) * ao + bb % ao;
            let cb = (jj / ai) * bo + bb / ao;
            m[(r, col)] = a.matrix[(ra, ca)] * b.matrix[(rb, cb)];
        }
    }
    ChoiMatrix { n_in: a.n_in + b.n_in, n_out: a.n_out + b.n_out, matrix: m }
}

/// Partial trace of an operator on `n_qubits` (little-endian) over `traced`.
pub fn partial_trace(m: &ComplexMatrix, n_qubits: usize, traced: &[usize]) -> Result<ComplexMatrix> {
    let side = 1usize << n_qubits;
    if m.shape() != (side, side) {
        return Err(QpdError::Dimension(format!("expected {side}×{side} operator")));
    }
    let mut seen = 0usize;
    for &q in traced {
        if q >= n_qubits || seen & (1 << q) != 0 {
            return Err(QpdError::InvalidInput(format!("invalid traced qubit list {traced:?}")));
        }
        seen |= 1 << q;
    }
    Ok(linalg::partial_trace_qubits(m, traced, n_qubits))
}

pub fn is_tpcp(choi: &ChoiMatrix, tol: f64) -> TpcpVerdict {
    let herm = hermitian_deviation(&choi.matrix);
    let min_eig = linalg::min_eigenvalue(&choi.matrix);
    let tp_dev = choi.marginal_deviation(1.0);
    TpcpVerdict {
        completely_positive: herm <= tol.max(TOL.hermitian) && min_eig >= -tol,
        trace_preserving: tp_dev <= tol,
        min_eigenvalue: min_eig,
        tp_deviation: tp_dev,
        hermitian_deviation: herm,
    }
}

pub fn channel_rank(choi: &ChoiMatrix) -> ChannelRank {
    ChannelRank(linalg::eigvalsh(&choi.matrix).iter().filter(|&&v| v > TOL.rank_cutoff).count())
}
