//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use qpd::channel::{choi_from_operator, choi_from_unitary, compose, tensor, ChoiMatrix, DensityMatrix};
use qpd::cli::gate_set;
use qpd::gates::{gate_matrix, paulis, Circuit, GateKind, GateSpec};
use qpd::linalg::{self, c, ComplexMatrix};
use qpd::noise::{standard_basis, NoiseModel, NoiseOracle};
use qpd::qpd::{
    approximate_qpd, budget_grid, diamond_distance, diamond_norm_with, exact_qpd, hermitian_coordinates,
    tradeoff_curve, DiamondForm, LabeledChannel, PhysicalityFlags, QpdItem, QuasiprobabilityDecomposition,
    TradeoffCurve,
};
use qpd::sampler::{sample_circuit, variance_overhead, GateQpd, GateQpdAssignment, ObservableSpec, OutputMode};
use qpd::stinespring::{optimal_gamma, run_stinespring, RunStatus, StinespringConfig, StinespringRun};
use qpd::variational::{variational_fit, VariationalForm};

const P2_GRID: [f64; 3] = [0.004, 0.01, 0.02];
const STINESPRING_DEPTH: usize = 7;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// `γ` of the optimal inverse of `d`-dimensional depolarizing noise.
fn inverse_depolarizing_gamma(p: f64, d: f64) -> f64 {
    (1.0 + p * (d * d - 2.0) / (d * d)) / (1.0 - p)
}

/// `‖U − D_p∘U‖⋄ = 2p(1 − 1/d²)`.
fn depolarizing_error(p: f64, d: f64) -> f64 {
    2.0 * p * (1.0 - 1.0 / (d * d))
}

fn single_gate(kind: GateKind) -> Circuit {
    let k = kind.arity();
    let qubits: Vec<usize> = (0..k).collect();
    Circuit::from_gates(k, k, vec![GateSpec::new(kind, &qubits).unwrap()]).unwrap()
}

fn ideal(c: &Circuit) -> ChoiMatrix {
    choi_from_operator(&c.operator()).unwrap()
}

struct StinespringPoint {
    p2: f64,
    gamma_opt: f64,
    gamma_standard: f64,
    run: StinespringRun,
}

fn stinespring_points() -> Vec<StinespringPoint> {
    let cnot = single_gate(GateKind::Cnot);
    P2_GRID
        .iter()
        .map(|&p2| {
            let nm = NoiseModel::depolarizing(p2);
            let cfg = StinespringConfig { depth: STINESPRING_DEPTH, ..StinespringConfig::for_qubits(2) };
            let run = run_stinespring(&cnot, &nm, &cfg).unwrap();
            let noisy = nm.realize(&cnot).unwrap();
            let gamma_opt = optimal_gamma(&ideal(&cnot), &noisy).unwrap();
            let gamma_standard = exact_qpd(&ideal(&cnot), &gate_set(&cnot, &nm).unwrap()).unwrap().gamma;
            StinespringPoint { p2, gamma_opt, gamma_standard, run }
        })
        .collect()
}

fn criterion_1(points: &[StinespringPoint]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for pt in points {
        let closed = inverse_depolarizing_gamma(pt.p2, 4.0);
        let ratio = (pt.run.qpd.gamma - 1.0) / (closed - 1.0);
        let ok = pt.run.status == RunStatus::Converged && ratio <= 1.10 && (pt.gamma_opt - closed).abs() <= 1e-6;
        pass &= ok;
        parts.push(format!("p2={} γ_stine={:.7} γ_opt={:.7} ratio={:.4}", pt.p2, pt.run.qpd.gamma, closed, ratio));
    }
    Verdict::new(pass, parts.join("; "))
}

fn noisy_pauli_set(u: &ComplexMatrix, p: f64) -> Vec<LabeledChannel> {
    let dep = ChoiMatrix::depolarizing(1, p);
    let cu = choi_from_unitary(u).unwrap();
    ["I", "X", "Y", "Z"]
        .iter()
        .zip(paulis())
        .map(|(l, pm)| (l.to_string(), compose(&dep, &compose(&choi_from_unitary(&pm).unwrap(), &cu).unwrap()).unwrap()))
        .collect()
}

/// Least-squares coefficients of `target` over `set` in Hermitian
/// coordinates; unique when the set is linearly independent.
fn least_squares_gamma(target: &ChoiMatrix, set: &[LabeledChannel]) -> f64 {
    let cols: Vec<Vec<f64>> = set.iter().map(|(_, ch)| hermitian_coordinates(ch.matrix())).collect();
    let a = DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i]);
    let b = nalgebra::DVector::from_vec(hermitian_coordinates(target.matrix()));
    let x = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
    assert!((&a * &x - &b).norm() < 1e-10);
    x.iter().map(|v| v.abs()).sum()
}

fn criterion_2() -> Verdict {
    let mut worst: f64 = 0.0;
    for &p in &[0.01, 0.05, 0.1] {
        for kind in [GateKind::H, GateKind::Ry(0.7), GateKind::Rz(-1.3)] {
            let u = gate_matrix(&kind);
            let set = noisy_pauli_set(&u, p);
            let target = choi_from_unitary(&u).unwrap();
            let got = exact_qpd(&target, &set).unwrap().gamma;
            let closed = (1.0 + p / 2.0) / (1.0 - p);
            let lp = least_squares_gamma(&target, &set);
            worst = worst.max((got - closed).abs()).max((lp - closed).abs());
        }
    }
    Verdict::new(worst <= 1e-6, format!("max |γ − (1+p/2)/(1−p)| = {worst:.2e}"))
}

fn random_hermitian_map(rng: &mut ChaCha20Rng, n: usize) -> ChoiMatrix {
    let d = 1usize << (2 * n);
    ChoiMatrix::from_matrix(n, n, linalg::random_hermitian(d, rng).unscale(d as f64)).unwrap()
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut primal_dual: f64 = 0.0;
    for k in 0..25 {
        let map = random_hermitian_map(&mut rng, if k < 20 { 1 } else { 2 });
        let dual = diamond_norm_with(&map, DiamondForm::Dual).unwrap();
        let primal = diamond_norm_with(&map, DiamondForm::Primal).unwrap();
        primal_dual = primal_dual.max((dual - primal).abs());
    }
    let mut pauli: f64 = 0.0;
    let ps = paulis();
    for _ in 0..10 {
        let w: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|v| v / s).collect();
        let chois: Vec<ChoiMatrix> = ps.iter().map(|m| choi_from_unitary(m).unwrap()).collect();
        let channel = ChoiMatrix::linear_combination(probs.iter().copied().zip(&chois)).unwrap();
        let diff = ChoiMatrix::identity(1).sub(&channel).unwrap();
        let got = diamond_norm_with(&diff, DiamondForm::Dual).unwrap();
        pauli = pauli.max((got - 2.0 * (1.0 - probs[0])).abs());
    }
    let x = choi_from_unitary(&ps[1]).unwrap();
    let xi = diamond_distance(&x, &ChoiMatrix::identity(1)).unwrap();
    let pass = primal_dual <= 1e-6 && pauli <= 1e-6 && (xi - 2.0).abs() <= 1e-6;
    Verdict::new(pass, format!("primal/dual {primal_dual:.2e}, Pauli formula {pauli:.2e}, ‖[X]−[I]‖⋄ = {xi:.9}"))
}

struct GateCurve {
    name: &'static str,
    target: ChoiMatrix,
    set: Vec<LabeledChannel>,
    curve: TradeoffCurve,
}

fn tradeoff_curves(p2: f64) -> Vec<GateCurve> {
    let nm = NoiseModel::depolarizing(p2);
    [("Ry", GateKind::Ry(0.4)), ("CNOT", GateKind::Cnot), ("SWAP", GateKind::Swap)]
        .into_iter()
        .map(|(name, kind)| {
            let c = single_gate(kind);
            let target = ideal(&c);
            let set = gate_set(&c, &nm).unwrap();
            let gopt = exact_qpd(&target, &set).unwrap().gamma;
            let curve = tradeoff_curve(name, &target, &set, &budget_grid(gopt, 21), PhysicalityFlags::TPCP).unwrap();
            GateCurve { name, target, set, curve }
        })
        .collect()
}

fn criterion_4(curves: &[GateCurve], p2: f64, points: &[StinespringPoint]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for gc in curves {
        let d = (gc.target.d_in()) as f64;
        let p = if gc.target.n_in() == 2 { p2 } else { 0.1 * p2 };
        let gopt = exact_qpd(&gc.target, &gc.set).unwrap().gamma;
        let at_opt = approximate_qpd(&gc.target, &gc.set, gopt, PhysicalityFlags::TPCP).unwrap().residual;
        let at_one = gc.curve.eval(1.0).unwrap();
        let noisy_error = depolarizing_error(p, d);
        let rise = gc.curve.max_rise().1;
        let convex = gc.curve.max_convexity_violation();
        let ok = at_opt <= 1e-6 && (at_one - noisy_error).abs() <= 1e-6 && rise <= 1e-7 && convex <= 1e-7;
        pass &= ok;
        parts.push(format!(
            "{} ε(γ_opt)={at_opt:.1e} ε(1)−noisy={:.1e} rise={rise:.1e} convexity={convex:.1e}",
            gc.name,
            at_one - noisy_error
        ));
    }
    for pt in points {
        let ok = pt.run.qpd.gamma < pt.gamma_standard;
        pass &= ok;
        parts.push(format!(
            "p2={}: γ_stine={:.6} {} γ_standard={:.6}",
            pt.p2,
            pt.run.qpd.gamma,
            if ok { "<" } else { "≥" },
            pt.gamma_standard
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_5(points: &[StinespringPoint]) -> Verdict {
    let pt = points.iter().find(|p| p.p2 == 0.02).expect("grid contains 0.02");
    let deltas = pt.run.trace.deltas();
    let decreasing = deltas.windows(2).all(|w| w[1] < w[0]);
    let crossed = deltas.iter().position(|&d| d <= 1e-7).map(|i| i + 1);
    let added: Vec<usize> =
        pt.run.trace.records.iter().filter(|r| r.channels_added > 0).map(|r| r.channels_added).collect();
    let sixteen = added.iter().all(|&n| n == 16);

    let cnot = single_gate(GateKind::Cnot);
    let cfg = StinespringConfig { depth: STINESPRING_DEPTH, ..StinespringConfig::for_qubits(2) };
    let clean = run_stinespring(&cnot, &NoiseModel::noiseless(), &cfg).unwrap();
    let clean_ok = clean.trace.records.len() == 1 && (clean.qpd.gamma - 1.0).abs() <= 1e-6;

    let pass = decreasing && crossed.is_some_and(|k| k <= 15) && sixteen && clean_ok;
    let shown: Vec<String> = deltas.iter().map(|d| format!("{d:.1e}")).collect();
    Verdict::new(
        pass,
        format!(
            "Δ = [{}], crosses 1e-7 at round {:?}, added per round {:?}, noiseless rounds {} γ={:.9}",
            shown.join(", "),
            crossed,
            added,
            clean.trace.records.len(),
            clean.qpd.gamma
        ),
    )
}

fn single_qpd(choi: ChoiMatrix, items: Vec<(f64, ChoiMatrix)>) -> QuasiprobabilityDecomposition {
    let gamma = items.iter().map(|i| i.0.abs()).sum();
    QuasiprobabilityDecomposition {
        target: choi,
        items: items.into_iter().enumerate().map(|(k, (a, c))| QpdItem { label: format!("e{k}"), coefficient: a, choi: c }).collect(),
        gamma,
        residual: 0.0,
    }
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let nm = NoiseModel::depolarizing(0.05);
    let circuit =
        Circuit::from_gates(2, 2, vec![GateSpec::ry(0, 0.9), GateSpec::cnot(0, 1), GateSpec::rz(1, 0.4)]).unwrap();
    let gates = qpd::cli::gate_assignment(&circuit, &nm, true).unwrap();
    let u = circuit.operator();
    let mut worst_z: f64 = 0.0;
    for k in 0..10 {
        let rho = DensityMatrix::new(linalg::random_density(4, &mut rng)).unwrap();
        let obs = ObservableSpec::new(linalg::random_hermitian(4, &mut rng)).unwrap();
        let exact = obs.expectation(&(&u * rho.matrix() * u.adjoint()));
        let r = sample_circuit(&rho, &gates, &obs, 100_000, 100 + k, OutputMode::Expectation).unwrap();
        worst_z = worst_z.max((r.mean - exact).abs() / r.stderr);
    }

    let p = 0.1;
    let id = linalg::identity(2);
    let set = noisy_pauli_set(&id, p);
    let target = ChoiMatrix::identity(1);
    let mitigated = exact_qpd(&target, &set).unwrap();
    let gamma = mitigated.gamma;
    let plus = DensityMatrix::pure(&[c(std::f64::consts::FRAC_1_SQRT_2, 0.0), c(std::f64::consts::FRAC_1_SQRT_2, 0.0)]).unwrap();
    let z = ObservableSpec::new(paulis()[3].clone()).unwrap();
    let shots = 1_000_000;
    let qpd_run = GateQpdAssignment::new(vec![GateQpd { qubits: vec![0], qpd: mitigated.clone() }]);
    let ideal_run =
        GateQpdAssignment::new(vec![GateQpd { qubits: vec![0], qpd: single_qpd(target.clone(), vec![(1.0, target.clone())]) }]);
    let r_qpd = sample_circuit(&plus, &qpd_run, &z, shots, 61, OutputMode::Bernoulli).unwrap();
    let r_ideal = sample_circuit(&plus, &ideal_run, &z, shots, 62, OutputMode::Bernoulli).unwrap();
    let ratio = variance_overhead(&r_qpd, r_ideal.stderr) / (gamma * gamma);

    let g3 = GateQpdAssignment::new(vec![GateQpd { qubits: vec![0], qpd: mitigated }; 3]);
    let r3 = sample_circuit(&plus, &g3, &z, 1000, 63, OutputMode::Expectation).unwrap();
    let product = gamma * gamma * gamma;
    let product_ok = r3.gamma_total == product && g3.gamma_total() == product;

    let pass = worst_z <= 4.0 && (0.5..=2.0).contains(&ratio) && product_ok;
    Verdict::new(
        pass,
        format!("max |mean−exact|/stderr = {worst_z:.2}, variance ratio / γ² = {ratio:.3}, γ_total = Πγ_k: {product_ok}"),
    )
}

/// Rank-one Kraus operators of the standard basis and their gate words, read right to left.
fn table_one() -> Vec<(&'static str, ComplexMatrix, &'static str)> {
    let [i, x, y, z] = paulis();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let ic = c(0.0, 1.0);
    vec![
        ("I", i.clone(), ""),
        ("X", x.clone(), "H S S H"),
        ("Y", y.clone(), "H S S H S S"),
        ("Z", z.clone(), "S S"),
        ("Rx", (&i + &x * ic).scale(r), "H S S S H"),
        ("Ry", (&i + &y * ic).scale(r), "S H S S S H S S S"),
        ("Rz", (&i + &z * ic).scale(r), "S S S"),
        ("Ryz", (&y + &z).scale(r), "H S S S H S S"),
        ("Rzx", (&z + &x).scale(r), "S S S H S S S H S S S"),
        ("Rxy", (&x + &y).scale(r), "H S S H S S S"),
        ("piX", (&i + &x).scale(0.5), "S H S H P0 H S S S H S S S"),
        ("piY", (&i + &y).scale(0.5), "H S S S H P0 H S H"),
        ("piZ", (&i + &z).scale(0.5), "P0"),
        ("piYZ", (&y + &z * ic).scale(0.5), "S H S H P0 H S H S S S"),
        ("piZX", (&z + &x * ic).scale(0.5), "H S S S H P0 H S H S S"),
        ("piXY", (&x + &y * ic).scale(0.5), "P0 H S S H"),
    ]
}

fn word_operator(word: &str) -> ComplexMatrix {
    let h = linalg::from_real_rows(&[&[1.0, 1.0], &[1.0, -1.0]]).unscale(2f64.sqrt());
    let s = linalg::from_rows(&[&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(0.0, 1.0)]]);
    let p0 = linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
    word.split_whitespace().fold(linalg::identity(2), |acc, t| {
        let g = match t {
            "H" => &h,
            "S" => &s,
            _ => &p0,
        };
        acc * g
    })
}

fn criterion_7() -> Verdict {
    let basis = standard_basis(1, &NoiseModel::noiseless()).unwrap();
    let table = table_one();
    let mut worst: f64 = 0.0;
    for ((label, kraus, word), (got_label, got)) in table.iter().zip(&basis) {
        assert_eq!(label, got_label);
        let closed = choi_from_operator(kraus).unwrap();
        let from_word = choi_from_operator(&word_operator(word)).unwrap();
        worst = worst.max(got.distance(&closed)).max(from_word.distance(&closed));
    }
    let rows: Vec<Vec<f64>> = basis.iter().map(|(_, ch)| hermitian_coordinates(ch.matrix())).collect();
    let m = DMatrix::from_fn(16, rows[0].len(), |i, j| rows[i][j]);
    let sv = m.singular_values();
    let rank = sv.iter().filter(|&&s| s > 1e-9 * sv.max()).count();
    Verdict::new(worst <= 1e-9 && rank == 16, format!("max channel deviation {worst:.1e}, rank {rank}"))
}

fn criterion_8(curves: &[GateCurve]) -> Verdict {
    let ry = &curves[0];
    let cx = &curves[1];
    let pair = [ry.curve.clone(), cx.curve.clone()];
    let mut pass = true;
    let mut worst_res: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut bound_slack = f64::INFINITY;
    let opt_total = qpd::budget::exact_budget(&pair[0]).unwrap() * qpd::budget::exact_budget(&pair[1]).unwrap();
    let totals = [1.0, 1.005, 1.01, 1.02, 0.5 * (1.0 + opt_total), opt_total];
    let mut low_share = 0.0;
    for (k, &total) in totals.iter().enumerate() {
        let alloc = qpd::budget::optimize_budget(&pair, total).unwrap();
        worst_res = worst_res.max(alloc.constraint_residual());
        let s = total.sqrt();
        let uniform = pair[0].eval(s).unwrap() + pair[1].eval(s).unwrap();
        worst_gap = worst_gap.max(alloc.objective - uniform);
        if k == 2 {
            low_share = alloc.log_share(1);
        }

        // Ry on qubit 0 followed by CNOT(0, 1).
        let f_ry = approximate_qpd(&ry.target, &ry.set, alloc.budgets[0], PhysicalityFlags::TPCP).unwrap();
        let f_cx = approximate_qpd(&cx.target, &cx.set, alloc.budgets[1], PhysicalityFlags::TPCP).unwrap();
        let composed = compose(&f_cx.recombine(), &tensor(&f_ry.recombine(), &ChoiMatrix::identity(1))).unwrap();
        let exact = compose(&cx.target, &tensor(&ry.target, &ChoiMatrix::identity(1))).unwrap();
        let end_to_end = diamond_distance(&composed, &exact).unwrap();
        bound_slack = bound_slack.min(f_ry.residual + f_cx.residual + 1e-6 - end_to_end);
    }
    pass &= worst_res <= 1e-9 && worst_gap <= 1e-9 && bound_slack >= 0.0 && low_share >= 0.8;
    Verdict::new(
        pass,
        format!(
            "constraint residual {worst_res:.1e}, objective − uniform ≤ {worst_gap:.1e}, min bound slack {bound_slack:.1e}, CNOT log-share at γ_total=1.01: {low_share:.3}"
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let form = VariationalForm::new(3, 2, 3).unwrap();
    let theta: Vec<f64> = (0..form.param_count()).map(|_| rng.random::<f64>() * 6.0).collect();
    let target = linalg::haar_unitary(8, &mut rng);
    let v = target.columns(0, 4).into_owned();
    let mut grad = vec![0.0; theta.len()];
    form.loss_and_gradient(&v, &theta, &mut grad, false).unwrap();
    let mut worst_rel: f64 = 0.0;
    let h = 1e-6;
    for k in 0..theta.len() {
        let (mut tp, mut tm) = (theta.clone(), theta.clone());
        tp[k] += h;
        tm[k] -= h;
        let mut scratch = vec![0.0; theta.len()];
        let fd = (form.loss_and_gradient(&v, &tp, &mut scratch, false).unwrap()
            - form.loss_and_gradient(&v, &tm, &mut scratch, false).unwrap())
            / (2.0 * h);
        worst_rel = worst_rel.max((fd - grad[k]).abs() / grad[k].abs().max(1e-3));
    }

    let representable_form = VariationalForm::new(2, 2, 2).unwrap();
    let t0: Vec<f64> = (0..representable_form.param_count()).map(|_| rng.random::<f64>() * 6.0).collect();
    let representable = representable_form.unitary(&t0).unwrap();
    let fit0 = variational_fit(&representable, 2, 5, 1).unwrap().objective;

    let haar = linalg::haar_unitary(8, &mut rng);
    let objectives: Vec<f64> = [2, 4, 6, 8].iter().map(|&m| variational_fit(&haar, m, 5, 2).unwrap().objective).collect();
    let monotone = objectives.windows(2).all(|w| w[1] <= w[0]);
    let pass = worst_rel <= 1e-5 && fit0 <= 1e-6 && monotone;
    let shown: Vec<String> = objectives.iter().map(|o| format!("{o:.4}")).collect();
    Verdict::new(
        pass,
        format!("gradient rel. error {worst_rel:.1e}, representable fit {fit0:.1e}, Haar objective by depth 2/4/6/8: [{}]", shown.join(", ")),
    )
}

fn report(k: usize, v: &Verdict, t: Instant) -> bool {
    println!(
        "criterion {k}: {} ({:.1}s) {}",
        if v.pass { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64(),
        v.detail
    );
    v.pass
}

fn main() {
    let mut passed = Vec::new();
    let mut t = Instant::now();
    let points = stinespring_points();
    passed.push(report(1, &criterion_1(&points), t));
    t = Instant::now();
    passed.push(report(2, &criterion_2(), t));
    t = Instant::now();
    passed.push(report(3, &criterion_3(), t));
    t = Instant::now();
    let curves = tradeoff_curves(0.02);
    passed.push(report(4, &criterion_4(&curves, 0.02, &points), t));
    t = Instant::now();
    passed.push(report(5, &criterion_5(&points), t));
    t = Instant::now();
    passed.push(report(6, &criterion_6(), t));
    t = Instant::now();
    passed.push(report(7, &criterion_7(), t));
    t = Instant::now();
    passed.push(report(8, &criterion_8(&curves), t));
    t = Instant::now();
    passed.push(report(9, &criterion_9(), t));
    let n = passed.iter().filter(|&&p| p).count();
    println!("acceptance: {n}/{} criteria passed", passed.len());
    if n != passed.len() {
        std::process::exit(1);
    }
}
