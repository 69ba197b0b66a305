//! Signed decompositions of Hermitian-preserving maps into channels.
//!
//! [`two_channel_decomposition`] solves the unconstrained problem as an SDP.
//! [`rank_constrained_decomposition`] adds a rank bound through the
//! factorization `Λ̃ = X†X` and minimizes the squared constraint violation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, channel_rank, ChoiJson, ChoiMatrix};
use crate::error::{QpdError, Result};
use crate::linalg::{self, c, eigh, frobenius, kron, ComplexMatrix};
use crate::optim::{self, LbfgsSettings};
use crate::qpd::hermitian_coordinates;
use crate::solver::{self, ComplexSdpBuilder};

/// Relative tolerance on the proportional-marginal precondition.
const MARGINAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// A weight `a ≥ 0` attached to a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedChannel {
    pub weight: f64,
    pub choi: ChoiMatrix,
}

/// `Λ_F ≈ Σ a_i⁺ Λ_i⁺ − Σ a_i⁻ Λ_i⁻`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDecomposition {
    pub positive: Vec<WeightedChannel>,
    pub negative: Vec<WeightedChannel>,
    pub gamma: f64,
    /// `‖Λ_F − Σ a⁺Λ⁺ + Σ a⁻Λ⁻‖_F`.
    pub residual: f64,
    /// Final value of the factorized objective; `None` for the SDP.
    pub objective: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionItemJson {
    pub a: f64,
    pub sign: Sign,
    pub rank: usize,
    pub source_iteration: usize,
    pub choi: ChoiJson,
}

impl ChannelDecomposition {
    /// Items in order, positive first, with their sign.
    pub fn signed_items(&self) -> impl Iterator<Item = (Sign, &WeightedChannel)> {
        self.positive
            .iter()
            .map(|w| (Sign::Positive, w))
            .chain(self.negative.iter().map(|w| (Sign::Negative, w)))
    }

    pub fn len(&self) -> usize {
        self.positive.len() + self.negative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn recombine(&self) -> Result<ChoiMatrix> {
        let first = self.signed_items().next().ok_or_else(|| QpdError::InvalidInput("empty decomposition".into()))?;
        let mut acc = ChoiMatrix::zero(first.1.choi.n_in(), first.1.choi.n_out());
        for (s, w) in self.signed_items() {
            acc = acc.add(&w.choi.scaled(s.factor() * w.weight))?;
        }
        Ok(acc)
    }

    /// Largest marginal deviation from trace preservation over all items.
    pub fn max_tp_deviation(&self) -> f64 {
        self.signed_items().map(|(_, w)| w.choi.marginal_deviation(1.0)).fold(0.0, f64::max)
    }

    /// Smallest Choi eigenvalue over all items.
    pub fn min_eigenvalue(&self) -> f64 {
        self.signed_items().map(|(_, w)| linalg::min_eigenvalue(w.choi.matrix())).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self, source_iteration: usize) -> Vec<DecompositionItemJson> {
        self.signed_items()
            .map(|(sign, w)| DecompositionItemJson {
                a: w.weight,
                sign,
                rank: channel_rank(&w.choi).0,
                source_iteration,
                choi: w.choi.to_json(),
            })
            .collect()
    }
}

/// Returns `s` with `tr₂ Λ = s·I/d_in`, or an error when the marginal is not
/// proportional to the identity.
fn marginal_scale(target: &ChoiMatrix) -> Result<f64> {
    let herm = linalg::hermitian_deviation(target.matrix());
    let norm = frobenius(target.matrix());
    if herm > 1e-9 * (1.0 + norm) {
        return Err(QpdError::NotHermitian(herm));
    }
    let s = target.trace();
    let dev = target.marginal_deviation(s);
    if dev > MARGINAL_TOL * norm.max(1e-300) && dev > 1e-12 {
        return Err(QpdError::NotTracePreserving(dev));
    }
    Ok(s)
}

/// Identity channel (rank 1), used as the channel of a zero-weight item.
fn placeholder(target: &ChoiMatrix) -> ChoiMatrix {
    ChoiMatrix::identity(target.n_in())
}

/// Optimal two-channel decomposition `Λ_F = a⁺Λ⁺ − a⁻Λ⁻` over all channels.
///
/// The target must be Hermitian with marginal proportional to the identity.
pub fn two_channel_decomposition(target: &ChoiMatrix) -> Result<ChannelDecomposition> {
    let s = marginal_scale(target)?;
    let (di, dout) = (target.d_in(), target.d_out());
    let side = di * dout;
    if frobenius(target.matrix()) == 0.0 {
        let ph = placeholder(target);
        return Ok(ChannelDecomposition {
            positive: vec![WeightedChannel { weight: 0.0, choi: ph.clone() }],
            negative: vec![WeightedChannel { weight: 0.0, choi: ph }],
            gamma: 0.0,
            residual: 0.0,
            objective: None,
            converged: true,
        });
    }
    // Work with J = d_in·Λ so that trace-preserving maps have marginal I.
    let scale = di as f64;
    let j = linalg::hermitian_part(&target.matrix().scale(scale));

    let mut b = ComplexSdpBuilder::new();
    let a_pos = b.scalar(1.0);
    let a_neg = b.scalar(1.0);
    let l = b.hermitian_var(side);
    let blk = b.block(ComplexMatrix::zeros(side, side));
    b.add_hermitian(blk, &l, 1.0, |e| e.to_vec());
    let blk = b.block(-&j);
    b.add_hermitian(blk, &l, 1.0, |e| e.to_vec());

    // Marginal coordinates of each basis element of L.
    let l_marg: Vec<Vec<f64>> = l
        .coords
        .iter()
        .map(|(_, e)| {
            let mut m = ComplexMatrix::zeros(di, di);
            for &(r, col, z) in e {
                if r % dout == col % dout {
                    m[(r / dout, col / dout)] += z;
                }
            }
            hermitian_coordinates(&m)
        })
        .collect();
    let id_coords = hermitian_coordinates(&linalg::identity(di));
    let j_marg = hermitian_coordinates(&linalg::partial_trace_second(&j, di, dout));
    for (a_var, rhs) in [(a_pos, None), (a_neg, Some(&j_marg))] {
        for row in 0..id_coords.len() {
            let mut coeffs: Vec<(usize, f64)> = l
                .coords
                .iter()
                .zip(&l_marg)
                .filter(|(_, m)| m[row] != 0.0)
                .map(|((k, _), m)| (*k, m[row]))
                .collect();
            if id_coords[row] != 0.0 {
                coeffs.push((a_var, -id_coords[row]));
            }
            b.equality(coeffs, rhs.map_or(0.0, |v| v[row]));
        }
    }
    let sol = solver::solve_sdp(&b.build())?.require_optimal("two-channel decomposition")?;
    let lv = linalg::hermitian_part(&l.value(&sol.x)).unscale(scale);
    let (mut ap, mut an) = (sol.x[a_pos].max(0.0), sol.x[a_neg].max(0.0));
    let tiny = 1e-8 * (1.0 + s.abs());
    let lambda = target.matrix();
    let make = |m: ComplexMatrix, a: f64| -> Result<ChoiMatrix> {
        ChoiMatrix::from_matrix(target.n_in(), target.n_out(), m.unscale(a))
    };
    let pos = if ap > tiny {
        make(lv.clone(), ap)?
    } else {
        ap = 0.0;
        placeholder(target)
    };
    let neg = if an > tiny {
        make(&lv - lambda, an)?
    } else {
        an = 0.0;
        placeholder(target)
    };
    let mut out = ChannelDecomposition {
        positive: vec![WeightedChannel { weight: ap, choi: pos }],
        negative: vec![WeightedChannel { weight: an, choi: neg }],
        gamma: ap + an,
        residual: 0.0,
        objective: None,
        converged: true,
    };
    out.residual = frobenius(target.sub(&out.recombine()?)?.matrix());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BMConfig {
    /// Rank bound `r` on every channel.
    pub rank: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Slack `ε` on the γ-factor: `Σa ≤ (1 + ε) f*`.
    pub epsilon: f64,
    pub restarts: usize,
    /// Quasi-Newton iterations per restart.
    pub max_iterations: usize,
    /// Objective below which a restart counts as successful.
    pub success_threshold: f64,
    pub seed: u64,
}

impl Default for BMConfig {
    fn default() -> Self {
        Self::for_qubits(2)
    }
}

impl BMConfig {
    /// Defaults for an `n`-qubit target: two items per sign for one qubit,
    /// eight for two.
    pub fn for_qubits(n: usize) -> Self {
        let items = if n <= 1 { 2 } else { 8 };
        Self {
            rank: 2,
            n_pos: items,
            n_neg: items,
            epsilon: 0.2,
            restarts: 5,
            max_iterations: 4000,
            success_threshold: 1e-10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank < 2 {
            return Err(QpdError::InvalidInput(format!("rank bound must be at least 2, got {}", self.rank)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(QpdError::InvalidInput(format!("slack ε must be nonnegative, got {}", self.epsilon)));
        }
        if self.n_pos + self.n_neg == 0 || self.restarts == 0 {
            return Err(QpdError::InvalidInput("need at least one item and one restart".into()));
        }
        if !(self.success_threshold > 0.0) {
            return Err(QpdError::InvalidInput("success threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Starting point of the factorized program.
#[derive(Debug, Clone, PartialEq)]
pub struct BmInitialization {
    /// `X_i` of shape `r × D`; positive items first.
    pub factors: Vec<ComplexMatrix>,
    pub signs: Vec<Sign>,
    /// `a_i = tr(Y_i Y_i†)`.
    pub weights: Vec<f64>,
}

/// Splits `Λ̃⁺ = a⁺Λ⁺` and `Λ̃⁻ = a⁻Λ⁻` of a two-channel decomposition into
/// groups of `r` eigenpairs in nonincreasing eigenvalue order.
pub fn bm_initialize(two: &ChannelDecomposition, cfg: &BMConfig) -> BmInitialization {
    let mut factors = Vec::new();
    let mut signs = Vec::new();
    let mut weights = Vec::new();
    let r = cfg.rank;
    for (sign, list, count) in
        [(Sign::Positive, &two.positive, cfg.n_pos), (Sign::Negative, &two.negative, cfg.n_neg)]
    {
        let unnorm = match list.first() {
            Some(w) => w.choi.matrix().scale(w.weight),
            None => ComplexMatrix::zeros(0, 0),
        };
        let side = unnorm.nrows();
        let (vals, vecs) = if side > 0 { eigh(&linalg::hermitian_part(&unnorm)) } else { (Vec::new(), unnorm.clone()) };
        let order: Vec<usize> = (0..vals.len()).rev().collect();
        for item in 0..count {
            let mut x = ComplexMatrix::zeros(r, side);
            let mut w = 0.0;
            for row in 0..r {
                let Some(&k) = order.get(item * r + row) else { break };
                let lam = vals[k].max(0.0);
                w += lam;
                let s = lam.sqrt();
                for col in 0..side {
                    x[(row, col)] = vecs[(col, k)].conj() * s;
                }
            }
            factors.push(x);
            signs.push(sign);
            weights.push(w);
        }
    }
    BmInitialization { factors, signs, weights }
}

/// Euclidean projection of `v ≥ 0` onto `{a ≥ 0, Σa ≤ cap}`.
fn project_capped(v: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= cap {
        return clipped;
    }
    let mut sorted = clipped.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        acc += x;
        let t = (acc - cap) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    clipped.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// The factorized program on a fixed target, in units where `f* = 1`.
struct Factorized<'a> {
    target: &'a ComplexMatrix,
    signs: Vec<f64>,
    rank: usize,
    side: usize,
    di: usize,
    dout: usize,
    cap: f64,
}

impl Factorized<'_> {
    fn unpack(&self, x: &[f64]) -> Vec<ComplexMatrix> {
        let per = self.rank * self.side;
        (0..self.signs.len())
            .map(|i| {
                let base = 2 * per * i;
                ComplexMatrix::from_fn(self.rank, self.side, |r, col| {
                    let k = base + r * self.side + col;
                    c(x[k], x[k + per])
                })
            })
            .collect()
    }

    fn pack(&self, xs: &[ComplexMatrix]) -> Vec<f64> {
        let per = self.rank * self.side;
        let mut out = vec![0.0; 2 * per * xs.len()];
        for (i, x) in xs.iter().enumerate() {
            let base = 2 * per * i;
            for r in 0..self.rank {
                for col in 0..self.side {
                    let k = base + r * self.side + col;
                    out[k] = x[(r, col)].re;
                    out[k + per] = x[(r, col)].im;
                }
            }
        }
        out
    }

    /// Objective, gradient and the projected weights.
    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> (f64, Vec<f64>) {
        let xs = self.unpack(x);
        let blocks: Vec<ComplexMatrix> = xs.iter().map(|x| x.adjoint() * x).collect();
        let traces: Vec<f64> = blocks.iter().map(|b| linalg::trace(b).re).collect();
        let a = project_capped(&traces, self.cap);
        let mut resid = self.target.clone();
        for (b, s) in blocks.iter().zip(&self.signs) {
            resid -= b.scale(*s);
        }
        let mut value = frobenius(&resid).powi(2);
        let id_out = linalg::identity(self.dout);
        let mut grads = Vec::with_capacity(xs.len());
        for (((x, b), s), ai) in xs.iter().zip(&blocks).zip(&self.signs).zip(&a) {
            let mut p = linalg::partial_trace_second(b, self.di, self.dout);
            for k in 0..self.di {
                p[(k, k)] -= c(ai / self.di as f64, 0.0);
            }
            value += frobenius(&p).powi(2);
            let g = x * (kron(&p, &id_out).scale(4.0) - resid.scale(4.0 * s));
            grads.push(g);
        }
        grad.copy_from_slice(&self.pack(&grads));
        (value, a)
    }
}

struct RestartOutcome {
    x: Vec<f64>,
    value: f64,
}

/// Rank-constrained decomposition with `γ ≤ (1 + ε)·f*`, starting from the
/// spectral split of the two-channel optimum and refined by quasi-Newton
/// descent on the factors.
///
/// Every returned channel is `X†X / tr(X†X)` for an `r`-row factor, so its
/// rank is at most `r`. A result whose objective stays above the success
/// threshold after all restarts is returned with `converged = false`.
pub fn rank_constrained_decomposition(
    target: &ChoiMatrix,
    cfg: &BMConfig,
    f_star: f64,
) -> Result<ChannelDecomposition> {
    cfg.validate()?;
    marginal_scale(target)?;
    if !(f_star >= 0.0) || !f_star.is_finite() {
        return Err(QpdError::InvalidInput(format!("f* must be finite and nonnegative, got {f_star}")));
    }
    let two = two_channel_decomposition(target)?;
    rank_constrained_from(target, &two, cfg, f_star)
}

/// As [`rank_constrained_decomposition`], reusing an available two-channel
/// decomposition of the same target.
pub fn rank_constrained_from(
    target: &ChoiMatrix,
    two: &ChannelDecomposition,
    cfg: &BMConfig,
    f_star: f64,
) -> Result<ChannelDecomposition> {
    cfg.validate()?;
    let init = bm_initialize(two, cfg);
    let side = target.matrix().nrows();
    let n_items = init.factors.len();
    if f_star <= 0.0 || frobenius(target.matrix()) == 0.0 {
        let ph = placeholder(target);
        let zero = |n| vec![WeightedChannel { weight: 0.0, choi: ph.clone() }; n];
        return Ok(ChannelDecomposition {
            positive: zero(cfg.n_pos),
            negative: zero(cfg.n_neg),
            gamma: 0.0,
            residual: frobenius(target.matrix()),
            objective: Some(0.0),
            converged: frobenius(target.matrix()) == 0.0,
        });
    }
    // The problem is homogeneous; normalize so that f* = 1.
    let unit = target.matrix().unscale(f_star);
    let prob = Factorized {
        target: &unit,
        signs: init.signs.iter().map(|s| s.factor()).collect(),
        rank: cfg.rank,
        side,
        di: target.d_in(),
        dout: target.d_out(),
        cap: 1.0 + cfg.epsilon,
    };
    let x0 = prob.pack(&init.factors.iter().map(|x| x.unscale(f_star.sqrt())).collect::<Vec<_>>());
    let settings = LbfgsSettings {
        memory: 20,
        max_iterations: cfg.max_iterations,
        gradient_tolerance: 1e-15,
        objective_target: 1e-6 * cfg.success_threshold,
    };
    let x0_norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let run = |restart: usize| -> RestartOutcome {
        let mut start = x0.clone();
        if restart > 0 {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(restart as u64);
            let sigma = 0.05 * x0_norm / (start.len() as f64).sqrt();
            for v in start.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * z;
            }
        }
        let m = optim::minimize(|x, g| prob.evaluate(x, g).0, start, &settings);
        RestartOutcome { x: m.x, value: m.value }
    };

    let first = run(0);
    let best = if first.value < cfg.success_threshold || cfg.restarts == 1 {
        first
    } else {
        let rest: Vec<RestartOutcome> = (1..cfg.restarts).into_par_iter().map(run).collect();
        std::iter::once(first)
            .chain(rest)
            .fold(None::<RestartOutcome>, |acc, o| match acc {
                Some(a) if a.value <= o.value => Some(a),
                _ => Some(o),
            })
            .expect("at least one restart")
    };

    let mut grad = vec![0.0; best.x.len()];
    let (value, _) = prob.evaluate(&best.x, &mut grad);
    let xs = prob.unpack(&best.x);
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (x, sign) in xs.iter().zip(&init.signs) {
        let block = x.adjoint() * x;
        let tr = linalg::trace(&block).re;
        let item = if tr > 1e-300 {
            let choi = ChoiMatrix::from_matrix(target.n_in(), target.n_out(), linalg::hermitian_part(&block).unscale(tr))?;
            WeightedChannel { weight: tr * f_star, choi }
        } else {
            WeightedChannel { weight: 0.0, choi: placeholder(target) }
        };
        match sign {
            Sign::Positive => positive.push(item),
            Sign::Negative => negative.push(item),
        }
    }
    debug_assert_eq!(positive.len() + negative.len(), n_items);
    let mut out = ChannelDecomposition {
        gamma: positive.iter().chain(&negative).map(|w| w.weight).sum(),
        positive,
        negative,
        residual: 0.0,
        objective: Some(value),
        converged: value < cfg.success_threshold,
    };
    // Items of negligible weight carry little marginal information.
    repair_trace_preservation(target, &mut out, cfg.rank, 1e-6)?;
    Ok(out)
}

/// Replaces every item whose marginal deviates from trace preservation by
/// more than `tol` with the nearest trace-preserving channel of rank at most
/// `rank`, then recomputes the residual.
pub fn repair_trace_preservation(
    target: &ChoiMatrix,
    dec: &mut ChannelDecomposition,
    rank: usize,
    tol: f64,
) -> Result<usize> {
    let mut repaired = 0;
    for w in dec.positive.iter_mut().chain(dec.negative.iter_mut()) {
        if w.choi.marginal_deviation(1.0) > tol {
            w.choi = channel::project_trace_preserving(&w.choi, rank)?;
            repaired += 1;
        }
    }
    dec.residual = frobenius(target.sub(&dec.recombine()?)?.matrix());
    Ok(repaired)
}
