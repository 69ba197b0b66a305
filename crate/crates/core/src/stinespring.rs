//! Iterative construction of a low-overhead decomposition set.
//!
//! Each round solves an approximate QPD over the current set, splits the
//! remaining error `δ` into low-rank channels, compiles each channel into a
//! variational circuit through its Stinespring dilation, and adds the
//! channels the hardware actually realizes for those circuits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{choi_from_unitary, ChoiJson, ChoiMatrix};
use crate::decomposition::{
    rank_constrained_from, two_channel_decomposition, BMConfig, ChannelDecomposition, Sign,
};
use crate::error::{QpdError, Result};
use crate::gates::Circuit;
use crate::linalg::frobenius;
use crate::noise::NoiseOracle;
use crate::qpd::{
    approximate_qpd, diamond_norm, exact_qpd, min_gamma_qpd, LabeledChannel, PhysicalityFlags,
    QuasiprobabilityDecomposition,
};
use crate::variational::{stinespring_isometry, variational_fit_with, FitSettings};

/// Budget used for the "unconstrained" error minimization.
const UNBOUNDED_BUDGET: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct SetElement {
    pub label: String,
    /// Round that produced the element; the noisy target itself is round 0.
    pub source_iteration: usize,
    pub circuit: Circuit,
    /// Channel realized by the oracle.
    pub choi: ChoiMatrix,
}

/// Ordered decomposition set. The first element is the noisy target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecompositionSet {
    elements: Vec<SetElement>,
}

impl DecompositionSet {
    pub fn new(first: SetElement) -> Self {
        Self { elements: vec![first] }
    }

    pub fn push(&mut self, e: SetElement) -> Result<()> {
        if self.elements.iter().any(|x| x.label == e.label) {
            return Err(QpdError::InvalidInput(format!("duplicate set label `{}`", e.label)));
        }
        self.elements.push(e);
        Ok(())
    }

    pub fn elements(&self) -> &[SetElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn labeled_channels(&self) -> Vec<LabeledChannel> {
        self.elements.iter().map(|e| (e.label.clone(), e.choi.clone())).collect()
    }

    pub fn to_json(&self) -> Vec<SetElementJson> {
        self.elements
            .iter()
            .map(|e| SetElementJson {
                label: e.label.clone(),
                source_iteration: e.source_iteration,
                circuit: e.circuit.clone(),
                choi: e.choi.to_json(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetElementJson {
    pub label: String,
    pub source_iteration: usize,
    pub circuit: Circuit,
    pub choi: ChoiJson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Diamond error of the QPD over the set at the start of the round.
    pub delta_norm: f64,
    pub gamma: f64,
    pub set_size: usize,
    /// `Λ_target − Σ a_i Λ_i`.
    pub residual: ChoiMatrix,
    pub channels_added: usize,
    /// γ of the rank-constrained split of `δ`, when one was computed.
    pub split_gamma: Option<f64>,
    pub split_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn deltas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.delta_norm).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    /// Largest increase of `Δ` between consecutive rounds (`≤ 0` when the
    /// sequence is nonincreasing).
    pub fn max_delta_rise(&self) -> f64 {
        self.records.windows(2).map(|w| w[1].delta_norm - w[0].delta_norm).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// How each round picks the coefficients of its approximate QPD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnerBudgetPolicy {
    /// Minimal `γ` among coefficient vectors whose error is within a factor
    /// `slack` of the smallest attainable error.
    NearBestError { slack: f64 },
    /// Raise the budget from 1 by `0.25·(γ + 1)` until the error improves by
    /// less than `min_improvement` (relative).
    Sweep { min_improvement: f64, max_steps: usize },
}

impl Default for InnerBudgetPolicy {
    fn default() -> Self {
        InnerBudgetPolicy::NearBestError { slack: 1.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StinespringConfig {
    pub delta_threshold: f64,
    pub max_iterations: usize,
    pub rank: usize,
    pub bm: BMConfig,
    /// Depth of the variational circuits.
    pub depth: usize,
    pub fit: FitSettings,
    pub budget_policy: InnerBudgetPolicy,
    pub seed: u64,
}

impl Default for StinespringConfig {
    fn default() -> Self {
        Self {
            delta_threshold: 1e-7,
            max_iterations: 15,
            rank: 2,
            bm: BMConfig::default(),
            depth: 6,
            fit: FitSettings::default(),
            budget_policy: InnerBudgetPolicy::default(),
            seed: 0,
        }
    }
}

impl StinespringConfig {
    /// Defaults with item counts suited to an `n`-qubit target.
    pub fn for_qubits(n: usize) -> Self {
        Self { bm: BMConfig::for_qubits(n), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_threshold > 0.0) {
            return Err(QpdError::InvalidInput("Δ threshold must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(QpdError::InvalidInput("need at least one iteration".into()));
        }
        if self.rank != self.bm.rank {
            return Err(QpdError::InvalidInput(format!(
                "rank bound {} differs from the decomposition rank {}",
                self.rank, self.bm.rank
            )));
        }
        if let InnerBudgetPolicy::NearBestError { slack } = self.budget_policy {
            if !(slack >= 1.0) {
                return Err(QpdError::InvalidInput(format!("slack must be at least 1, got {slack}")));
            }
        }
        self.bm.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIterations,
    DecompositionFailed,
}

#[derive(Debug, Clone)]
pub struct StinespringRun {
    pub set: DecompositionSet,
    pub trace: IterationTrace,
    /// QPD of the target over the final set; the minimal-γ one meeting the
    /// threshold when the run converged.
    pub qpd: QuasiprobabilityDecomposition,
    pub status: RunStatus,
    pub diagnostics: Vec<String>,
}

/// `δ = Λ_target − Σ a_i Λ_i` with the signed coefficients as stored.
pub fn residual_delta(target: &ChoiMatrix, qpd: &QuasiprobabilityDecomposition) -> Result<ChoiMatrix> {
    target.sub(&qpd.recombine())
}

fn inner_qpd(
    target: &ChoiMatrix,
    set: &[LabeledChannel],
    policy: InnerBudgetPolicy,
) -> Result<QuasiprobabilityDecomposition> {
    match exact_qpd(target, set) {
        Ok(q) => return Ok(q),
        Err(QpdError::NotInSpan(_)) => {}
        Err(e) => return Err(e),
    }
    match policy {
        InnerBudgetPolicy::NearBestError { slack } => {
            let best = approximate_qpd(target, set, UNBOUNDED_BUDGET, PhysicalityFlags::NONE)?;
            let cap = best.residual * slack;
            match min_gamma_qpd(target, set, cap, PhysicalityFlags::NONE) {
                Ok(q) if q.residual <= cap * (1.0 + 1e-6) + 1e-12 => Ok(q),
                _ => Ok(best),
            }
        }
        InnerBudgetPolicy::Sweep { min_improvement, max_steps } => {
            let mut budget = 1.0;
            let mut q = approximate_qpd(target, set, budget, PhysicalityFlags::NONE)?;
            for _ in 0..max_steps {
                budget += 0.25 * (q.gamma + 1.0);
                let next = approximate_qpd(target, set, budget, PhysicalityFlags::NONE)?;
                let improved = q.residual - next.residual > min_improvement * q.residual;
                if next.residual < q.residual {
                    q = next;
                }
                if !improved {
                    break;
                }
            }
            Ok(q)
        }
    }
}

fn split_delta(delta: &ChoiMatrix, cfg: &StinespringConfig, diagnostics: &mut Vec<String>) -> Result<ChannelDecomposition> {
    let two = two_channel_decomposition(delta)?;
    let dec = rank_constrained_from(delta, &two, &cfg.bm, two.gamma)?;
    if dec.converged {
        return Ok(dec);
    }
    diagnostics.push(format!(
        "rank-constrained split stalled at objective {:.3e}; retrying with {} restarts",
        dec.objective.unwrap_or(f64::NAN),
        2 * cfg.bm.restarts
    ));
    let retry = BMConfig { restarts: 2 * cfg.bm.restarts, seed: cfg.bm.seed.wrapping_add(1), ..cfg.bm.clone() };
    rank_constrained_from(delta, &two, &retry, two.gamma)
}

/// Compiles one channel into a circuit on the data qubits plus one ancilla
/// per factor of two in rank, and realizes it.
fn compile_channel(
    choi: &ChoiMatrix,
    cfg: &StinespringConfig,
    oracle: &dyn NoiseOracle,
    seed: u64,
) -> Result<(Circuit, ChoiMatrix)> {
    let ancillas = cfg.rank.next_power_of_two().trailing_zeros() as usize;
    let dil = stinespring_isometry(choi, cfg.rank)?.with_ancillas(ancillas)?;
    let fit = variational_fit_with(&dil.isometry, cfg.depth, seed, &cfg.fit)?;
    let realized = fit.realize(oracle)?;
    Ok((fit.circuit, realized))
}

/// Builds a decomposition set for `target` by repeatedly decomposing the
/// remaining error of the best approximate QPD.
pub fn run_stinespring(target: &Circuit, oracle: &dyn NoiseOracle, cfg: &StinespringConfig) -> Result<StinespringRun> {
    cfg.validate()?;
    if target.n_data() != target.n_qubits() || !target.is_trace_preserving() {
        return Err(QpdError::InvalidInput("target must be a unitary circuit without ancillas".into()));
    }
    let ideal = choi_from_unitary(&target.operator())?;
    let mut set = DecompositionSet::new(SetElement {
        label: "target".into(),
        source_iteration: 0,
        circuit: target.clone(),
        choi: oracle.realize(target)?,
    });
    let mut trace = IterationTrace::default();
    let mut diagnostics = Vec::new();
    let mut status = RunStatus::MaxIterations;
    let mut last_qpd = None;

    for iteration in 1..=cfg.max_iterations {
        let channels = set.labeled_channels();
        let qpd = inner_qpd(&ideal, &channels, cfg.budget_policy)?;
        let delta = residual_delta(&ideal, &qpd)?;
        let delta_norm = if frobenius(delta.matrix()) < 1e-13 { 0.0 } else { diamond_norm(&delta)? };
        let mut record = IterationRecord {
            iteration,
            delta_norm,
            gamma: qpd.gamma,
            set_size: set.len(),
            residual: delta.clone(),
            channels_added: 0,
            split_gamma: None,
            split_converged: None,
        };
        last_qpd = Some(qpd);
        if delta_norm < cfg.delta_threshold {
            trace.records.push(record);
            status = RunStatus::Converged;
            break;
        }
        if iteration == cfg.max_iterations {
            trace.records.push(record);
            break;
        }

        let split = split_delta(&delta, cfg, &mut diagnostics)?;
        record.split_gamma = Some(split.gamma);
        record.split_converged = Some(split.converged);
        if !split.converged {
            diagnostics.push(format!(
                "round {iteration}: rank-constrained split did not converge (objective {:.3e})",
                split.objective.unwrap_or(f64::NAN)
            ));
            trace.records.push(record);
            status = RunStatus::DecompositionFailed;
            break;
        }
        let items: Vec<(Sign, usize, ChoiMatrix)> = {
            let mut pos = 0;
            let mut neg = 0;
            split
                .signed_items()
                .map(|(s, w)| {
                    let idx = match s {
                        Sign::Positive => {
                            pos += 1;
                            pos - 1
                        }
                        Sign::Negative => {
                            neg += 1;
                            neg - 1
                        }
                    };
                    (s, idx, w.choi.clone())
                })
                .collect()
        };
        let compiled: Vec<Result<(Circuit, ChoiMatrix)>> = items
            .par_iter()
            .enumerate()
            .map(|(k, (_, _, choi))| {
                let seed = cfg.seed ^ ((iteration as u64) << 40) ^ ((k as u64) << 20);
                compile_channel(choi, cfg, oracle, seed)
            })
            .collect();
        for ((sign, idx, _), res) in items.iter().zip(compiled) {
            let (circuit, choi) = res?;
            let tag = match sign {
                Sign::Positive => "p",
                Sign::Negative => "n",
            };
            set.push(SetElement { label: format!("r{iteration}.{tag}{idx}"), source_iteration: iteration, circuit, choi })?;
            record.channels_added += 1;
        }
        trace.records.push(record);
    }

    let channels = set.labeled_channels();
    let mut qpd = last_qpd.expect("at least one round runs");
    if status == RunStatus::Converged && qpd.residual > 0.0 {
        if let Ok(q) = min_gamma_qpd(&ideal, &channels, cfg.delta_threshold, PhysicalityFlags::NONE) {
            if q.gamma < qpd.gamma && q.residual <= cfg.delta_threshold {
                qpd = q;
            }
        }
    }
    Ok(StinespringRun { set, trace, qpd, status, diagnostics })
}

/// Optimal γ for `ideal` when every channel `N ∘ G` is implementable, where
/// `N = noisy ∘ U⁻¹` is the noise of the realized gate: the γ of the
/// two-channel decomposition of `N⁻¹ ∘ U`.
pub fn optimal_gamma(ideal: &ChoiMatrix, noisy: &ChoiMatrix) -> Result<f64> {
    let s_noisy = noisy.superoperator();
    let inv = s_noisy
        .clone()
        .try_inverse()
        .ok_or_else(|| QpdError::InvalidInput("realized gate is not invertible".into()))?;
    let s_u = ideal.superoperator();
    // N⁻¹ = U ∘ noisy⁻¹, so N⁻¹ ∘ U = U ∘ noisy⁻¹ ∘ U.
    let f = &s_u * inv * &s_u;
    let choi = ChoiMatrix::from_superoperator(ideal.n_in(), ideal.n_out(), &f)?;
    let herm = crate::linalg::hermitian_part(choi.matrix());
    let choi = ChoiMatrix::from_matrix(ideal.n_in(), ideal.n_out(), herm)?;
    Ok(two_channel_decomposition(&choi)?.gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationJson {
    pub iteration: usize,
    pub delta: f64,
    pub gamma: f64,
    pub set_size: usize,
    pub channels_added: usize,
    pub split_gamma: Option<f64>,
}

/// Run manifest: configuration, per-round `Δ`/`γ` and set labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: StinespringConfig,
    pub status: RunStatus,
    pub iterations: Vec<IterationJson>,
    pub labels: Vec<String>,
    pub final_gamma: f64,
    pub final_error: f64,
    pub coefficients: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl StinespringRun {
    pub fn manifest(&self, cfg: &StinespringConfig) -> Manifest {
        Manifest {
            config: cfg.clone(),
            status: self.status,
            iterations: self
                .trace
                .records
                .iter()
                .map(|r| IterationJson {
                    iteration: r.iteration,
                    delta: r.delta_norm,
                    gamma: r.gamma,
                    set_size: r.set_size,
                    channels_added: r.channels_added,
                    split_gamma: r.split_gamma,
                })
                .collect(),
            labels: self.set.elements().iter().map(|e| e.label.clone()).collect(),
            final_gamma: self.qpd.gamma,
            final_error: self.qpd.residual,
            coefficients: self.qpd.coefficients(),
            diagnostics: self.diagnostics.clone(),
        }
    }
}
