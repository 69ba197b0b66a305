//! Dense complex matrix helpers.
//!
//! Qubit ordering is little-endian throughout the crate: qubit `k` is bit `k`
//! of a computational basis index, so in a Kronecker product `A ⊗ B` the
//! factor `B` acts on the low-order qubits.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type RealMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn from_rows(rows: &[&[C64]]) -> ComplexMatrix {
    let r = rows.len();
    let cc = rows.first().map_or(0, |row| row.len());
    ComplexMatrix::from_fn(r, cc, |i, j| rows[i][j])
}

pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let r = rows.len();
    let cc = rows.first().map_or(0, |row| row.len());
    ComplexMatrix::from_fn(r, cc, |i, j| c(rows[i][j], 0.0))
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest entrywise deviation of `m` from `m†`.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermitian_deviation(m) <= tol
}

/// Largest entrywise deviation of `U†U` from the identity.
pub fn unitary_deviation(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn is_unitary(u: &ComplexMatrix, tol: f64) -> bool {
    unitary_deviation(u) <= tol
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_spectral_norm(m: &ComplexMatrix) -> f64 {
    eigvalsh(m).iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    m.clone().singular_values().iter().sum()
}

/// Scatter the bits of `local` into the positions listed in `qubits`.
#[inline]
pub(crate) fn scatter_bits(local: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (((local >> k) & 1) << q))
}

/// Gather the bits at positions `qubits` of `full` into a compact index.
#[inline]
pub(crate) fn gather_bits(full: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (((full >> q) & 1) << k))
}

/// Lift a `2^k × 2^k` operator acting on `qubits` (little-endian over the
/// list) to the full `n_qubits` register.
pub fn embed_operator(op: &ComplexMatrix, qubits: &[usize], n_qubits: usize) -> ComplexMatrix {
    let dim = 1usize << n_qubits;
    let mask = qubits.iter().fold(0usize, |m, &q| m | (1 << q));
    ComplexMatrix::from_fn(dim, dim, |r, col| {
        if (r & !mask) != (col & !mask) {
            ZERO
        } else {
            op[(gather_bits(r, qubits), gather_bits(col, qubits))]
        }
    })
}

/// Partial trace of an operator on `n_qubits` qubits over the listed qubits.
/// The remaining qubits keep their relative order.
pub fn partial_trace_qubits(m: &ComplexMatrix, traced: &[usize], n_qubits: usize) -> ComplexMatrix {
    let kept: Vec<usize> = (0..n_qubits).filter(|q| !traced.contains(q)).collect();
    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    ComplexMatrix::from_fn(dk, dk, |r, col| {
        let rb = scatter_bits(r, &kept);
        let cb = scatter_bits(col, &kept);
        (0..dt)
            .map(|t| {
                let tb = scatter_bits(t, traced);
                m[(rb | tb, cb | tb)]
            })
            .sum()
    })
}

/// Partial trace of an operator on `A ⊗ B` (Kronecker order) over factor B.
pub fn partial_trace_second(m: &ComplexMatrix, da: usize, db: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum())
}

/// Partial trace of an operator on `A ⊗ B` (Kronecker order) over factor A.
pub fn partial_trace_first(m: &ComplexMatrix, da: usize, db: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(db, db, |a, b| (0..da).map(|k| m[(k * db + a, k * db + b)]).sum())
}

/// Real inner product `Re tr(A† B)`.
pub fn real_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn random_complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let z = random_complex_gaussian(dim, dim, rng);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    hermitian_part(&random_complex_gaussian(dim, dim, rng))
}

/// Random full-rank density matrix (Ginibre ensemble).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = random_complex_gaussian(dim, dim, rng);
    let m = &g * g.adjoint();
    let t = trace(&m).re;
    m.unscale(t)
}

/// Orthonormal completion: returns a unitary whose first columns equal the
/// (orthonormal) columns of `v`. Candidate directions are the standard basis
/// vectors in index order; each is Gram-Schmidt reduced (twice) against the
/// columns collected so far and kept when its residual norm exceeds 1e-6.
pub fn complete_to_unitary(v: &ComplexMatrix) -> ComplexMatrix {
    let dim = v.nrows();
    let mut cols: Vec<nalgebra::DVector<C64>> = (0..v.ncols()).map(|j| v.column(j).into_owned()).collect();
    let mut e = 0;
    while cols.len() < dim && e < dim {
        let mut cand = nalgebra::DVector::<C64>::zeros(dim);
        cand[e] = ONE;
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&cand);
                cand -= q * proj;
            }
        }
        let nrm = cand.norm();
        if nrm > 1e-6 {
            cols.push(cand.unscale(nrm));
        }
        e += 1;
    }
    ComplexMatrix::from_fn(dim, dim, |i, j| cols[j][i])
}

/// Closest isometry in Frobenius norm (unitary factor of the polar decomposition).
pub fn nearest_isometry(v: &ComplexMatrix) -> ComplexMatrix {
    let svd = v.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn embed_matches_kron_ordering() {
        let x = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let z = from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        // X on qubit 0, Z on qubit 1 == Z ⊗ X in Kronecker order.
        let a = embed_operator(&x, &[0], 2) * embed_operator(&z, &[1], 2);
        assert!(frobenius(&(a - kron(&z, &x))) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_density(2, &mut rng);
        let b = random_density(4, &mut rng);
        let ab = kron(&b, &a); // a on qubit 0, b on qubits 1,2
        let ta = partial_trace_qubits(&ab, &[1, 2], 3);
        assert!(frobenius(&(ta - &a)) < 1e-13);
        let tb = partial_trace_qubits(&ab, &[0], 3);
        assert!(frobenius(&(tb - &b)) < 1e-13);
        assert!(frobenius(&(partial_trace_second(&ab, 4, 2) - &b)) < 1e-13);
        assert!(frobenius(&(partial_trace_first(&ab, 4, 2) - &a)) < 1e-13);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = haar_unitary(8, &mut rng);
        assert!(is_unitary(&u, 1e-12));
    }

    #[test]
    fn completion_keeps_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = haar_unitary(8, &mut rng);
        let v = u.columns(0, 4).into_owned();
        let w = complete_to_unitary(&v);
        assert!(is_unitary(&w, 1e-10));
        assert!(frobenius(&(w.columns(0, 4).into_owned() - v)) < 1e-12);
    }
}
