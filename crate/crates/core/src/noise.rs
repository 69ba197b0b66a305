//! Noise models and the density-matrix noise oracle.
//!
//! Depolarizing noise on a support `S` of `k` qubits is
//! `D_p(ρ) = (1 − p) ρ + p · I_S/2^k ⊗ tr_S ρ`, applied after each gate.

use serde::{Deserialize, Serialize};

use crate::channel::{ChoiMatrix, DensityMatrix};
use crate::error::{QpdError, Result};
use crate::gates::{gate_unitary, BasisElement, Circuit, GateKind, GateSpec, STANDARD_BASIS};
use crate::linalg::{self, c, embed_operator, ComplexMatrix, ZERO};

/// Where the noise of a multi-gate sequence is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Every gate is followed by its own noise channel.
    #[default]
    PerGate,
    /// The whole circuit runs ideally and one noise channel acts at the end
    /// on the qubits it touched.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p2: f64,
    pub p1: f64,
    pub gamma_ad: f64,
    pub gamma_pd: f64,
    pub measurement_error: f64,
    pub mode: NoiseMode,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { p2: 0.0, p1: 0.0, gamma_ad: 0.0, gamma_pd: 0.0, measurement_error: 0.0, mode: NoiseMode::PerGate }
    }

    /// Two-qubit rate `p2` with single-qubit rate `0.1·p2`.
    pub fn depolarizing(p2: f64) -> Self {
        Self { p2, p1: 0.1 * p2, ..Self::noiseless() }
    }

    pub fn with_p1(mut self, p1: f64) -> Self {
        self.p1 = p1;
        self
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p2", self.p2),
            ("p1", self.p1),
            ("gamma_ad", self.gamma_ad),
            ("gamma_pd", self.gamma_pd),
            ("measurement_error", self.measurement_error),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(QpdError::InvalidInput(format!("noise rate {name}={v} outside [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.gamma_ad == 0.0 && self.gamma_pd == 0.0 && self.measurement_error == 0.0
    }

    fn depolarizing_rate(&self, support: usize) -> f64 {
        if support >= 2 {
            self.p2
        } else {
            self.p1
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// Maps an intended circuit to the channel it realizes on its data qubits.
pub trait NoiseOracle: Send + Sync {
    fn realize(&self, circuit: &Circuit) -> Result<ChoiMatrix>;
}

impl NoiseOracle for NoiseModel {
    fn realize(&self, circuit: &Circuit) -> Result<ChoiMatrix> {
        simulate_noisy_circuit(circuit, self)
    }
}

/// `(1 − p) ρ + p · I_S/2^k ⊗ tr_S ρ`.
pub fn depolarize(rho: &ComplexMatrix, support: &[usize], n_qubits: usize, p: f64) -> ComplexMatrix {
    if p == 0.0 {
        return rho.clone();
    }
    let dim = 1usize << n_qubits;
    let mask = support.iter().fold(0usize, |m, &q| m | (1 << q));
    let ds = 1usize << support.len();
    let inv = 1.0 / ds as f64;
    let mut out = rho.scale(1.0 - p);
    for r in 0..dim {
        for col in 0..dim {
            if (r & mask) != (col & mask) {
                continue;
            }
            let (rb, cb) = (r & !mask, col & !mask);
            let mut acc = ZERO;
            for t in 0..ds {
                let tb = linalg::scatter_bits(t, support);
                acc += rho[(rb | tb, cb | tb)];
            }
            out[(r, col)] += acc * (p * inv);
        }
    }
    out
}

fn apply_kraus_local(rho: &ComplexMatrix, kraus: &[ComplexMatrix], qubits: &[usize], n: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
    for k in kraus {
        let full = embed_operator(k, qubits, n);
        out += &full * rho * full.adjoint();
    }
    out
}

pub fn amplitude_damping_kraus(gamma: f64) -> [ComplexMatrix; 2] {
    [
        linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - gamma).sqrt()]]),
        linalg::from_real_rows(&[&[0.0, gamma.sqrt()], &[0.0, 0.0]]),
    ]
}

pub fn phase_damping_kraus(lambda: f64) -> [ComplexMatrix; 2] {
    [
        linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - lambda).sqrt()]]),
        linalg::from_real_rows(&[&[0.0, 0.0], &[0.0, lambda.sqrt()]]),
    ]
}

fn apply_noise(rho: ComplexMatrix, support: &[usize], n: usize, nm: &NoiseModel) -> ComplexMatrix {
    let mut rho = depolarize(&rho, support, n, nm.depolarizing_rate(support.len()));
    for &q in support {
        if nm.gamma_ad > 0.0 {
            rho = apply_kraus_local(&rho, &amplitude_damping_kraus(nm.gamma_ad), &[q], n);
        }
        if nm.gamma_pd > 0.0 {
            rho = apply_kraus_local(&rho, &phase_damping_kraus(nm.gamma_pd), &[q], n);
        }
    }
    rho
}

fn apply_gate(rho: &ComplexMatrix, g: &GateSpec, n: usize, nm: &NoiseModel) -> ComplexMatrix {
    if g.kind == GateKind::P0 && nm.measurement_error > 0.0 {
        let e = nm.measurement_error;
        let p0 = linalg::from_real_rows(&[&[(1.0 - e).sqrt(), 0.0], &[0.0, 0.0]]);
        let p1 = linalg::from_real_rows(&[&[0.0, 0.0], &[0.0, e.sqrt()]]);
        return apply_kraus_local(rho, &[p0, p1], &g.qubits, n);
    }
    let u = embed_operator(&gate_unitary(g), &g.qubits, n);
    &u * rho * u.adjoint()
}

/// Evolves `|i⟩⟨j| ⊗ |0⟩⟨0|_anc` for every data basis pair and assembles
/// the Choi matrix of the realized map on the data qubits.
pub fn simulate_noisy_circuit(circuit: &Circuit, nm: &NoiseModel) -> Result<ChoiMatrix> {
    nm.validate()?;
    let n = circuit.n_qubits();
    let nd = circuit.n_data();
    let d = 1usize << nd;
    let anc: Vec<usize> = (nd..n).collect();
    let mut touched = 0usize;
    for g in circuit.gates() {
        for &q in &g.qubits {
            touched |= 1 << q;
        }
    }
    let block_support: Vec<usize> = (0..n).filter(|q| touched & (1 << q) != 0).collect();

    let mut choi = ComplexMatrix::zeros(d * d, d * d);
    let inv = 1.0 / d as f64;
    for i in 0..d {
        for j in 0..d {
            let mut rho = ComplexMatrix::zeros(1 << n, 1 << n);
            rho[(i, j)] = c(1.0, 0.0);
            for g in circuit.gates() {
                rho = apply_gate(&rho, g, n, nm);
                if nm.mode == NoiseMode::PerGate {
                    rho = apply_noise(rho, &g.qubits, n, nm);
                }
            }
            if nm.mode == NoiseMode::Block && !block_support.is_empty() {
                rho = apply_noise(rho, &block_support, n, nm);
            }
            let out = if anc.is_empty() { rho } else { linalg::partial_trace_qubits(&rho, &anc, n) };
            for a in 0..d {
                for b in 0..d {
                    choi[(i * d + a, j * d + b)] = out[(a, b)] * inv;
                }
            }
        }
    }
    ChoiMatrix::from_matrix(nd, nd, choi)
}

/// Applies a circuit to a state on its full register (no ancilla handling).
pub fn simulate_state(circuit: &Circuit, nm: &NoiseModel, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    if rho.n_qubits() != circuit.n_qubits() {
        return Err(QpdError::Dimension("state and circuit sizes differ".into()));
    }
    let n = circuit.n_qubits();
    let mut r = rho.matrix().clone();
    for g in circuit.gates() {
        r = apply_gate(&r, g, n, nm);
        r = apply_noise(r, &g.qubits, n, nm);
    }
    Ok(r)
}

/// The 16-element single-qubit standard basis (`n_qubits = 1`) or its 256
/// pairwise products (`n_qubits = 2`), each realized by the oracle.
///
/// Two-qubit labels read `a.b` with `a` on qubit 0 and `b` on qubit 1.
pub fn standard_basis(n_qubits: usize, oracle: &dyn NoiseOracle) -> Result<Vec<(String, ChoiMatrix)>> {
    match n_qubits {
        1 => STANDARD_BASIS
            .iter()
            .map(|e| {
                let c = Circuit::from_gates(1, 1, e.gates_on(0))?;
                Ok((e.label.to_string(), oracle.realize(&c)?))
            })
            .collect(),
        2 => {
            let mut out = Vec::with_capacity(256);
            for hi in &STANDARD_BASIS {
                for lo in &STANDARD_BASIS {
                    out.push((format!("{}.{}", lo.label, hi.label), oracle.realize(&pair_circuit(lo, hi)?)?));
                }
            }
            Ok(out)
        }
        _ => Err(QpdError::InvalidInput(format!("standard basis defined for 1 or 2 qubits, got {n_qubits}"))),
    }
}

fn pair_circuit(lo: &BasisElement, hi: &BasisElement) -> Result<Circuit> {
    let mut gates = lo.gates_on(0);
    gates.extend(hi.gates_on(1));
    Circuit::from_gates(2, 2, gates)
}
