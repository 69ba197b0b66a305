use qpd::channel::{choi_from_operator, choi_from_unitary, compose, ChoiMatrix, DensityMatrix};
use qpd::gates::{paulis, GateSpec};
use qpd::linalg::{self, c};
use qpd::qpd::{exact_qpd, QpdItem, QuasiprobabilityDecomposition};
use qpd::sampler::{sample_circuit, variance_overhead, GateQpd, GateQpdAssignment, ObservableSpec, OutputMode};

fn pauli_twirl_set(p: f64) -> Vec<(String, ChoiMatrix)> {
    let dep = ChoiMatrix::depolarizing(1, p);
    ["I", "X", "Y", "Z"]
        .iter()
        .zip(paulis())
        .map(|(l, m)| (l.to_string(), compose(&dep, &choi_from_unitary(&m).unwrap()).unwrap()))
        .collect()
}

fn one_gate(qpd: QuasiprobabilityDecomposition) -> GateQpdAssignment {
    GateQpdAssignment::new(vec![GateQpd { qubits: vec![0], qpd }])
}

fn plus() -> DensityMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    DensityMatrix::pure(&[c(r, 0.0), c(r, 0.0)]).unwrap()
}

#[test]
fn identity_over_noisy_paulis_is_unbiased() {
    let qpd = exact_qpd(&ChoiMatrix::identity(1), &pauli_twirl_set(0.1)).unwrap();
    let z = ObservableSpec::new(paulis()[3].clone()).unwrap();
    let r = sample_circuit(&DensityMatrix::zero_state(1), &one_gate(qpd), &z, 1_000_000, 5, OutputMode::Bernoulli).unwrap();
    assert!((r.mean - 1.0).abs() <= 4.0 * r.stderr, "{r:?}");
    assert!(r.mean.abs() <= r.gamma_total * z.spectral_bound() + 5.0 * r.stderr);
}

#[test]
fn ideal_run_has_unit_overhead() {
    let id = ChoiMatrix::identity(1);
    let single = QuasiprobabilityDecomposition {
        target: id.clone(),
        items: vec![QpdItem { label: "I".into(), coefficient: 1.0, choi: id }],
        gamma: 1.0,
        residual: 0.0,
    };
    let z = ObservableSpec::new(paulis()[3].clone()).unwrap();
    let a = sample_circuit(&plus(), &one_gate(single.clone()), &z, 200_000, 1, OutputMode::Bernoulli).unwrap();
    let b = sample_circuit(&plus(), &one_gate(single), &z, 200_000, 2, OutputMode::Bernoulli).unwrap();
    let ratio = variance_overhead(&a, b.stderr);
    assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
    assert_eq!(variance_overhead(&a, 0.0), f64::INFINITY);
}

#[test]
fn shots_scale_with_gamma_squared() {
    // Fixed-stderr shot count ∝ variance; regress log variance on log γ.
    let z = ObservableSpec::new(paulis()[3].clone()).unwrap();
    let mut pts = Vec::new();
    for (k, p) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let qpd = exact_qpd(&ChoiMatrix::identity(1), &pauli_twirl_set(p)).unwrap();
        let gamma = qpd.gamma;
        let r = sample_circuit(&plus(), &one_gate(qpd), &z, 400_000, 40 + k as u64, OutputMode::Bernoulli).unwrap();
        let var = r.stderr * r.stderr * r.shots as f64;
        pts.push((gamma.ln(), var.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn abort_fraction_matches_postselection_probability() {
    let p0 = choi_from_operator(&linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap();
    let h = choi_from_unitary(&qpd::gates::gate_unitary(&GateSpec::ry(0, 1.1))).unwrap();
    let qpd = QuasiprobabilityDecomposition {
        target: p0.clone(),
        items: vec![
            QpdItem { label: "P0".into(), coefficient: 1.5, choi: p0 },
            QpdItem { label: "Ry".into(), coefficient: -0.5, choi: h },
        ],
        gamma: 2.0,
        residual: 0.0,
    };
    let z = ObservableSpec::new(paulis()[3].clone()).unwrap();
    let shots = 200_000u64;
    let r = sample_circuit(&plus(), &one_gate(qpd), &z, shots, 8, OutputMode::Expectation).unwrap();
    // P0 is drawn with probability 3/4 and then fails on |+⟩ half the time.
    let expected = 0.75 * 0.5;
    let sd = (expected * (1.0 - expected) / shots as f64).sqrt();
    assert!((r.abort_fraction - expected).abs() <= 4.0 * sd, "{r:?}");
    // ⟨Z⟩ after Ry(θ) on |+⟩ is −sin θ.
    let exact = 1.5 * 0.5 - 0.5 * (-(1.1f64).sin());
    assert!((r.mean - exact).abs() <= 4.0 * r.stderr, "{} vs {exact}", r.mean);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let qpd = exact_qpd(&ChoiMatrix::identity(1), &pauli_twirl_set(0.2)).unwrap();
    let z = ObservableSpec::new(paulis()[1].clone()).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            sample_circuit(&plus(), &one_gate(qpd.clone()), &z, 100_000, 3, OutputMode::Bernoulli).unwrap()
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn non_hermitian_observable_is_rejected() {
    let m = linalg::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
    assert!(ObservableSpec::new(m).is_err());
}
