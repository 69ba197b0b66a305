//! Stinespring dilations and their variational circuit approximation.
//!
//! The ansatz alternates layers of `Ry·Rz` rotations on every qubit with a
//! linear chain of CNOTs. Ancillas sit above the data qubits, so the
//! isometry of a dilation is the stack `[K_0; K_1; …]` of Kraus operators.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, channel_rank, ChoiMatrix};
use crate::config::TOL;
use crate::error::{QpdError, Result};
use crate::gates::{gate_matrix, Circuit, GateKind, GateSpec, MAX_QUBITS};
use crate::linalg::{self, c, ComplexMatrix, C64};
use crate::noise::NoiseOracle;
use crate::optim::{self, LbfgsSettings};
use crate::qpd::diamond_distance;

/// Tolerance on `V†V = I` before the polar repair is applied.
const ISOMETRY_REPAIR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DilationResult {
    /// `2^(n+a) × 2^n` isometry.
    pub isometry: ComplexMatrix,
    pub ancillas: usize,
    /// Unitary whose ancilla-`|0⟩` columns equal the isometry.
    pub unitary: ComplexMatrix,
}

impl DilationResult {
    pub fn n_data(&self) -> usize {
        self.isometry.ncols().trailing_zeros() as usize
    }

    /// The same dilation on `ancillas ≥ self.ancillas` ancilla qubits, with
    /// the extra Kraus slots set to zero.
    pub fn with_ancillas(&self, ancillas: usize) -> Result<Self> {
        if ancillas < self.ancillas {
            return Err(QpdError::InvalidInput(format!(
                "cannot shrink a dilation from {} to {ancillas} ancillas",
                self.ancillas
            )));
        }
        let k = self.isometry.ncols();
        let mut v = ComplexMatrix::zeros(k << ancillas, k);
        v.view_mut((0, 0), self.isometry.shape()).copy_from(&self.isometry);
        let unitary = linalg::complete_to_unitary(&v);
        Ok(Self { isometry: v, ancillas, unitary })
    }

    /// The channel `ρ ↦ tr_R[VρV†]`.
    pub fn channel(&self) -> Result<ChoiMatrix> {
        let k = self.isometry.ncols();
        let ops: Vec<ComplexMatrix> =
            (0..1usize << self.ancillas).map(|i| self.isometry.view((i * k, 0), (k, k)).into_owned()).collect();
        channel::choi_from_kraus(&ops)
    }
}

/// Stinespring isometry of a channel of rank at most `rank_bound`, on
/// `⌈log₂ rank⌉` ancilla qubits.
pub fn stinespring_isometry(choi: &ChoiMatrix, rank_bound: usize) -> Result<DilationResult> {
    if choi.n_in() != choi.n_out() {
        return Err(QpdError::Dimension("dilation needs equal input and output size".into()));
    }
    let min_eig = linalg::min_eigenvalue(choi.matrix());
    if min_eig < -1e-7 {
        return Err(QpdError::NotCompletelyPositive(min_eig));
    }
    let tp = choi.marginal_deviation(1.0);
    if tp > ISOMETRY_REPAIR_TOL {
        return Err(QpdError::NotTracePreserving(tp));
    }
    let rank = channel_rank(choi).0.max(1);
    if rank > rank_bound {
        return Err(QpdError::RankExceeded { rank, bound: rank_bound });
    }
    let mut kraus = channel::kraus_from_choi(choi, TOL.rank_cutoff);
    kraus.truncate(rank);
    let ancillas = rank.next_power_of_two().trailing_zeros() as usize;
    let k = choi.d_in();
    let mut v = ComplexMatrix::zeros(k << ancillas, k);
    for (i, op) in kraus.iter().enumerate() {
        v.view_mut((i * k, 0), (k, k)).copy_from(op);
    }
    let gram_dev = linalg::frobenius(&(v.adjoint() * &v - linalg::identity(k)));
    if gram_dev > 0.0 {
        v = linalg::nearest_isometry(&v);
    }
    let unitary = linalg::complete_to_unitary(&v);
    Ok(DilationResult { isometry: v, ancillas, unitary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Rot { qubit: usize, axis: Axis, param: usize },
    Cnot { control: usize, target: usize },
}

/// The layered `Ry·Rz` + CNOT-chain ansatz on a line of qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariationalForm {
    pub n_qubits: usize,
    /// Data qubits occupy the lowest indices; the rest are ancillas.
    pub n_data: usize,
    pub depth: usize,
}

impl VariationalForm {
    pub fn new(n_qubits: usize, n_data: usize, depth: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS || n_data == 0 || n_data > n_qubits {
            return Err(QpdError::InvalidInput(format!(
                "ansatz needs 1 ≤ n_data ≤ n_qubits ≤ {MAX_QUBITS}, got {n_data} data of {n_qubits}"
            )));
        }
        Ok(Self { n_qubits, n_data, depth })
    }

    /// One ancilla above an `n_data`-qubit target.
    pub fn for_target(n_data: usize, depth: usize) -> Result<Self> {
        Self::new(n_data + 1, n_data, depth)
    }

    pub fn param_count(&self) -> usize {
        2 * self.n_qubits * (self.depth + 1)
    }

    pub fn cnot_count(&self) -> usize {
        (self.n_qubits - 1) * self.depth
    }

    fn steps(&self) -> Vec<Step> {
        let n = self.n_qubits;
        let mut out = Vec::with_capacity(self.param_count() + self.cnot_count());
        for layer in 0..=self.depth {
            if layer > 0 {
                for q in 0..n - 1 {
                    out.push(Step::Cnot { control: q, target: q + 1 });
                }
            }
            for q in 0..n {
                let base = layer * 2 * n + 2 * q;
                out.push(Step::Rot { qubit: q, axis: Axis::Y, param: base });
                out.push(Step::Rot { qubit: q, axis: Axis::Z, param: base + 1 });
            }
        }
        out
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(QpdError::Dimension(format!(
                "ansatz expects {} parameters, got {}",
                self.param_count(),
                theta.len()
            )));
        }
        Ok(())
    }

    pub fn circuit(&self, theta: &[f64]) -> Result<Circuit> {
        self.check_params(theta)?;
        let mut circ = Circuit::new(self.n_qubits, self.n_data)?;
        for step in self.steps() {
            circ.push(match step {
                Step::Cnot { control, target } => GateSpec::cnot(control, target),
                Step::Rot { qubit, axis: Axis::Y, param } => GateSpec::ry(qubit, theta[param]),
                Step::Rot { qubit, axis: Axis::Z, param } => GateSpec::rz(qubit, theta[param]),
            })?;
        }
        Ok(circ)
    }

    pub fn unitary(&self, theta: &[f64]) -> Result<ComplexMatrix> {
        let dim = 1usize << self.n_qubits;
        let mut u = linalg::identity(dim);
        self.check_params(theta)?;
        for step in self.steps() {
            apply_step(&step, theta, &mut u);
        }
        Ok(u)
    }

    /// Ancilla-`|0⟩` columns of [`Self::unitary`].
    pub fn isometry(&self, theta: &[f64]) -> Result<ComplexMatrix> {
        let k = 1usize << self.n_data;
        Ok(self.unitary(theta)?.columns(0, k).into_owned())
    }

    /// `‖V − V_Var(θ)‖_F²` (or `min_φ ‖V − e^{iφ}V_Var(θ)‖_F²`) and its
    /// gradient, by one forward and one adjoint sweep.
    pub fn loss_and_gradient(
        &self,
        v: &ComplexMatrix,
        theta: &[f64],
        grad: &mut [f64],
        phase_optimized: bool,
    ) -> Result<f64> {
        self.check_params(theta)?;
        let dim = 1usize << self.n_qubits;
        let k = 1usize << self.n_data;
        if v.shape() != (dim, k) {
            return Err(QpdError::Dimension(format!("isometry must be {dim}×{k}, got {}×{}", v.nrows(), v.ncols())));
        }
        let steps = self.steps();
        let mut states = Vec::with_capacity(steps.len() + 1);
        let mut b = ComplexMatrix::from_fn(dim, k, |r, col| if r == col { c(1.0, 0.0) } else { c(0.0, 0.0) });
        states.push(b.clone());
        for step in &steps {
            apply_step(step, theta, &mut b);
            states.push(b.clone());
        }
        let z: C64 = v.iter().zip(b.iter()).map(|(a, x)| a.conj() * x).sum();
        let vv = v.norm_squared();
        let bb = b.norm_squared();
        let (loss, weight) = if phase_optimized {
            let mag = z.norm();
            let w = if mag > 0.0 { z.conj() / mag } else { c(1.0, 0.0) };
            (vv + bb - 2.0 * mag, w)
        } else {
            (vv + bb - 2.0 * z.re, c(1.0, 0.0))
        };
        grad.iter_mut().for_each(|g| *g = 0.0);
        // adj = A_j† V where A_j is the product of the gates after step j.
        let mut adj = v.clone();
        for (j, step) in steps.iter().enumerate().rev() {
            if let Step::Rot { qubit, axis, param } = *step {
                // dB/dθ = (−i/2)·σ·B_{j+1}, σ the rotation's Pauli.
                let after = &states[j + 1];
                let mut dz = c(0.0, 0.0);
                let bit = 1usize << qubit;
                for col in 0..k {
                    for r in 0..dim {
                        let sb = match axis {
                            Axis::Z => {
                                if r & bit == 0 {
                                    after[(r, col)]
                                } else {
                                    -after[(r, col)]
                                }
                            }
                            // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩.
                            Axis::Y => {
                                if r & bit == 0 {
                                    c(0.0, -1.0) * after[(r | bit, col)]
                                } else {
                                    c(0.0, 1.0) * after[(r & !bit, col)]
                                }
                            }
                        };
                        dz += adj[(r, col)].conj() * sb;
                    }
                }
                dz *= c(0.0, -0.5);
                grad[param] += -2.0 * (weight * dz).re;
            }
            apply_step_adjoint(step, theta, &mut adj);
        }
        Ok(loss)
    }
}

fn rotation(axis: Axis, angle: f64) -> ComplexMatrix {
    match axis {
        Axis::Y => gate_matrix(&GateKind::Ry(angle)),
        Axis::Z => gate_matrix(&GateKind::Rz(angle)),
    }
}

/// Left-multiplies `m` by a 2×2 operator acting on `qubit`.
fn apply_single(op: &ComplexMatrix, qubit: usize, m: &mut ComplexMatrix) {
    let bit = 1usize << qubit;
    let (a, b, cc, d) = (op[(0, 0)], op[(0, 1)], op[(1, 0)], op[(1, 1)]);
    for col in 0..m.ncols() {
        for r in 0..m.nrows() {
            if r & bit != 0 {
                continue;
            }
            let (x0, x1) = (m[(r, col)], m[(r | bit, col)]);
            m[(r, col)] = a * x0 + b * x1;
            m[(r | bit, col)] = cc * x0 + d * x1;
        }
    }
}

fn apply_cnot(control: usize, target: usize, m: &mut ComplexMatrix) {
    let (cb, tb) = (1usize << control, 1usize << target);
    for r in 0..m.nrows() {
        if r & cb != 0 && r & tb == 0 {
            m.swap_rows(r, r | tb);
        }
    }
}

fn apply_step(step: &Step, theta: &[f64], m: &mut ComplexMatrix) {
    match *step {
        Step::Rot { qubit, axis, param } => apply_single(&rotation(axis, theta[param]), qubit, m),
        Step::Cnot { control, target } => apply_cnot(control, target, m),
    }
}

fn apply_step_adjoint(step: &Step, theta: &[f64], m: &mut ComplexMatrix) {
    match *step {
        Step::Rot { qubit, axis, param } => apply_single(&rotation(axis, -theta[param]), qubit, m),
        Step::Cnot { control, target } => apply_cnot(control, target, m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    pub restarts: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Quasi-Newton memory; `1` is memoryless BFGS.
    pub memory: usize,
    /// Fit up to a global phase.
    pub phase_optimized: bool,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { restarts: 5, max_iterations: 500, gradient_tolerance: 1e-9, memory: 1, phase_optimized: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub form: VariationalForm,
    pub theta: Vec<f64>,
    /// `‖V − V_Var(θ)‖_F` at the best restart.
    pub objective: f64,
    /// Final objective of every restart, in restart order.
    pub restart_objectives: Vec<f64>,
    pub circuit: Circuit,
}

impl FitResult {
    /// Channel realized by the fitted circuit under `oracle`.
    pub fn realize(&self, oracle: &dyn NoiseOracle) -> Result<ChoiMatrix> {
        oracle.realize(&self.circuit)
    }
}

/// Deterministic generator for restart `restart` of a depth-`depth` fit.
fn fit_rng(seed: u64, restart: usize, depth: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((depth as u64) << 32) | restart as u64);
    rng
}

/// Fits the ansatz of depth `depth` to the isometry `v` from uniformly random
/// starting angles, keeping the best of `restarts` runs.
pub fn variational_fit(v: &ComplexMatrix, depth: usize, restarts: usize, seed: u64) -> Result<FitResult> {
    let settings = FitSettings { restarts, ..FitSettings::default() };
    variational_fit_with(v, depth, seed, &settings)
}

pub fn variational_fit_with(v: &ComplexMatrix, depth: usize, seed: u64, settings: &FitSettings) -> Result<FitResult> {
    let (rows, cols) = v.shape();
    if !rows.is_power_of_two() || !cols.is_power_of_two() || rows < cols {
        return Err(QpdError::Dimension(format!("isometry shape {rows}×{cols}")));
    }
    let form = VariationalForm::new(rows.trailing_zeros() as usize, cols.trailing_zeros() as usize, depth)?;
    let n_params = form.param_count();
    let lbfgs = LbfgsSettings {
        memory: settings.memory,
        max_iterations: settings.max_iterations,
        gradient_tolerance: settings.gradient_tolerance,
        objective_target: f64::NEG_INFINITY,
    };
    let runs: Vec<(Vec<f64>, f64)> = (0..settings.restarts.max(1))
        .into_par_iter()
        .map(|restart| {
            let mut rng = fit_rng(seed, restart, depth);
            let theta0: Vec<f64> = (0..n_params).map(|_| rng.random::<f64>() * TAU).collect();
            let m = optim::minimize(
                |x, g| form.loss_and_gradient(v, x, g, settings.phase_optimized).expect("shapes validated"),
                theta0,
                &lbfgs,
            );
            (m.x, m.value.max(0.0).sqrt())
        })
        .collect();
    let restart_objectives: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let best = (0..runs.len()).fold(0, |b, i| if runs[i].1 < runs[b].1 { i } else { b });
    let theta = runs[best].0.clone();
    let circuit = form.circuit(&theta)?;
    Ok(FitResult { form, theta, objective: runs[best].1, restart_objectives, circuit })
}

/// One row of a depth sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub depth: usize,
    pub fit_objective: f64,
    /// Diamond distance of the realized channel to the target, or the
    /// failure of this row.
    pub diamond_error: std::result::Result<f64, String>,
}

/// Fits every depth, realizes the circuit under `oracle` and measures the
/// diamond distance to `target`. Rows fail independently.
pub fn sweep_depth(
    v: &ComplexMatrix,
    target: &ChoiMatrix,
    depths: &[usize],
    oracle: &dyn NoiseOracle,
    seed: u64,
    settings: &FitSettings,
) -> Vec<DepthRow> {
    depths
        .par_iter()
        .map(|&depth| match variational_fit_with(v, depth, seed, settings) {
            Ok(fit) => {
                let err = fit
                    .realize(oracle)
                    .and_then(|ch| diamond_distance(target, &ch))
                    .map_err(|e| e.to_string());
                DepthRow { depth, fit_objective: fit.objective, diamond_error: err }
            }
            Err(e) => DepthRow { depth, fit_objective: f64::NAN, diamond_error: Err(e.to_string()) },
        })
        .collect()
}

/// CSV with header `m,fit_objective,diamond_error`; failed rows leave the
/// error column empty.
pub fn depth_sweep_csv(rows: &[DepthRow]) -> String {
    let mut out = String::from("m,fit_objective,diamond_error\n");
    for r in rows {
        let err = r.diamond_error.as_ref().map(|e| crate::fmt17(*e)).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", r.depth, crate::fmt17(r.fit_objective), err));
    }
    out
}
