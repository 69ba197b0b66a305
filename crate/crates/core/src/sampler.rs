//! Monte Carlo estimation with quasiprobability decompositions.
//!
//! Each shot samples one item per gate with probability `|a_i|/γ_k`, evolves
//! the density matrix through the sampled channels and outputs the signed,
//! `γ`-weighted result. Postselection failures output `0`.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel_on, DensityMatrix};
use crate::error::{QpdError, Result};
use crate::linalg::{self, eigh, ComplexMatrix};
use crate::qpd::QuasiprobabilityDecomposition;

/// Shots per independently seeded batch.
pub const BATCH_SIZE: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    matrix: ComplexMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: ComplexMatrix,
}

impl ObservableSpec {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || !matrix.nrows().is_power_of_two() {
            return Err(QpdError::Dimension(format!("observable shape {}×{}", matrix.nrows(), matrix.ncols())));
        }
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > 1e-10 {
            return Err(QpdError::NotHermitian(dev));
        }
        let matrix = linalg::hermitian_part(&matrix);
        let (eigenvalues, eigenvectors) = eigh(&matrix);
        Ok(Self { matrix, eigenvalues, eigenvectors })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `‖O‖_∞`.
    pub fn spectral_bound(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn expectation(&self, rho: &ComplexMatrix) -> f64 {
        linalg::real_inner(&self.matrix, rho)
    }
}

/// A QPD applied to specific qubits of the register.
#[derive(Debug, Clone, PartialEq)]
pub struct GateQpd {
    pub qubits: Vec<usize>,
    pub qpd: QuasiprobabilityDecomposition,
}

impl GateQpd {
    pub fn gamma(&self) -> f64 {
        self.qpd.items.iter().map(|i| i.coefficient.abs()).sum()
    }
}

/// Per-gate decompositions of a circuit, in execution order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GateQpdAssignment {
    pub gates: Vec<GateQpd>,
}

impl GateQpdAssignment {
    pub fn new(gates: Vec<GateQpd>) -> Self {
        Self { gates }
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.gates.iter().map(GateQpd::gamma).collect()
    }

    /// `Π γ_k`.
    pub fn gamma_total(&self) -> f64 {
        self.gammas().iter().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Each shot outputs `tr[O ρ]` of its final state.
    #[default]
    Expectation,
    /// Each shot outputs an eigenvalue of `O` drawn from its final state.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub shots: u64,
    pub mean: f64,
    pub stderr: f64,
    pub abort_fraction: f64,
    pub gamma_total: f64,
    pub seed: u64,
    pub mode: OutputMode,
}

impl EstimateReport {
    pub fn csv_header() -> &'static str {
        "shots,mean,stderr,gamma_total,abort_frac,seed"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.shots,
            crate::fmt17(self.mean),
            crate::fmt17(self.stderr),
            crate::fmt17(self.gamma_total),
            crate::fmt17(self.abort_fraction),
            self.seed
        )
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
    aborts: u64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Welford) -> Welford {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Welford {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
            aborts: self.aborts + o.aborts,
        }
    }
}

/// Outcome data of one index tuple.
#[derive(Debug, Clone)]
struct Branch {
    /// Sign of `Π a_i`.
    sign: f64,
    /// Postselection success probability `tr ρ`.
    survival: f64,
    /// `tr[O ρ]/tr ρ`.
    expectation: f64,
    /// Eigenvalue weights `⟨v|ρ|v⟩/tr ρ` in eigenvalue order.
    outcome_weights: Option<WeightedIndex<f64>>,
}

fn evolve(
    rho0: &DensityMatrix,
    gates: &GateQpdAssignment,
    observable: &ObservableSpec,
    idx: &[usize],
    n: usize,
) -> Result<Branch> {
    let mut rho = rho0.matrix().clone();
    let mut sign = 1.0;
    for (g, &i) in gates.gates.iter().zip(idx) {
        let item = &g.qpd.items[i];
        sign *= item.coefficient.signum();
        rho = apply_channel_on(&item.choi, &rho, &g.qubits, n)?;
    }
    let survival = linalg::trace(&rho).re.clamp(0.0, 1.0);
    if survival <= 1e-15 {
        return Ok(Branch { sign, survival: 0.0, expectation: 0.0, outcome_weights: None });
    }
    let expectation = observable.expectation(&rho) / survival;
    let v = &observable.eigenvectors;
    let weights: Vec<f64> = (0..v.ncols())
        .map(|k| {
            let col = v.column(k);
            (col.adjoint() * &rho * col)[(0, 0)].re.max(0.0)
        })
        .collect();
    let outcome_weights = WeightedIndex::new(&weights).ok();
    Ok(Branch { sign, survival, expectation, outcome_weights })
}

/// Estimates `tr[O · E_m ∘ … ∘ E_1(ρ₀)]` from `shots` quasiprobability samples.
///
/// Shots are split into batches of [`BATCH_SIZE`] seeded by `(seed, batch)`,
/// so the report depends only on `(inputs, shots, seed)`.
pub fn sample_circuit(
    rho0: &DensityMatrix,
    gates: &GateQpdAssignment,
    observable: &ObservableSpec,
    shots: u64,
    seed: u64,
    mode: OutputMode,
) -> Result<EstimateReport> {
    if shots == 0 {
        return Err(QpdError::InvalidInput("need at least one shot".into()));
    }
    let n = rho0.n_qubits();
    if observable.matrix().nrows() != rho0.dim() {
        return Err(QpdError::Dimension("observable and state sizes differ".into()));
    }
    let mut samplers = Vec::with_capacity(gates.gates.len());
    for g in &gates.gates {
        if g.qpd.items.is_empty() {
            return Err(QpdError::InvalidInput("gate QPD has no items".into()));
        }
        let w: Vec<f64> = g.qpd.items.iter().map(|i| i.coefficient.abs()).collect();
        samplers.push(
            WeightedIndex::new(&w).map_err(|e| QpdError::InvalidInput(format!("invalid QPD coefficients: {e}")))?,
        );
    }
    let gamma_total = gates.gamma_total();

    // Resolve every reachable index tuple up front when that is cheap, so
    // the shot loop only draws random numbers.
    let n_tuples: usize = gates.gates.iter().map(|g| g.qpd.items.len()).product();
    let table: Option<Vec<Branch>> = if n_tuples <= 1 << 16 {
        let tuples: Vec<Vec<usize>> = (0..n_tuples)
            .map(|mut t| {
                gates
                    .gates
                    .iter()
                    .map(|g| {
                        let k = g.qpd.items.len();
                        let i = t % k;
                        t /= k;
                        i
                    })
                    .collect()
            })
            .collect();
        Some(
            tuples
                .par_iter()
                .map(|idx| {
                    if idx.iter().zip(&gates.gates).any(|(&i, g)| g.qpd.items[i].coefficient == 0.0) {
                        Ok(Branch { sign: 0.0, survival: 0.0, expectation: 0.0, outcome_weights: None })
                    } else {
                        evolve(rho0, gates, observable, idx, n)
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let n_batches = shots.div_ceil(BATCH_SIZE as u64);
    let batches: Vec<Result<Welford>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = (shots - b * BATCH_SIZE as u64).min(BATCH_SIZE as u64);
            let mut acc = Welford::default();
            let mut cache: HashMap<Vec<usize>, Branch> = HashMap::new();
            let mut idx = vec![0usize; samplers.len()];
            for _ in 0..count {
                let mut key = 0usize;
                let mut stride = 1usize;
                for (k, s) in samplers.iter().enumerate() {
                    idx[k] = s.sample(&mut rng);
                    key += idx[k] * stride;
                    stride *= gates.gates[k].qpd.items.len();
                }
                let branch = match &table {
                    Some(t) => &t[key],
                    None => {
                        if !cache.contains_key(&idx) {
                            cache.insert(idx.clone(), evolve(rho0, gates, observable, &idx, n)?);
                        }
                        &cache[&idx]
                    }
                };
                let u: f64 = rng.random();
                if u >= branch.survival {
                    acc.aborts += 1;
                    acc.push(0.0);
                    continue;
                }
                let value = match mode {
                    OutputMode::Expectation => branch.expectation,
                    OutputMode::Bernoulli => match &branch.outcome_weights {
                        Some(w) => observable.eigenvalues[w.sample(&mut rng)],
                        None => 0.0,
                    },
                };
                acc.push(branch.sign * gamma_total * value);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Welford::default();
    for b in batches {
        total = total.merge(b?);
    }
    let var = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
    Ok(EstimateReport {
        shots,
        mean: total.mean,
        stderr: (var / shots as f64).sqrt(),
        abort_fraction: total.aborts as f64 / shots as f64,
        gamma_total,
        seed,
        mode,
    })
}

/// `(stderr / baseline_stderr)²`, or `+∞` when the baseline has no spread.
pub fn variance_overhead(report: &EstimateReport, baseline_stderr: f64) -> f64 {
    if baseline_stderr <= 0.0 {
        return f64::INFINITY;
    }
    (report.stderr / baseline_stderr).powi(2)
}
