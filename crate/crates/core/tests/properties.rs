use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qpd::budget::{curve_eval, optimize_budget};
use qpd::channel::{
    apply_channel, choi_from_kraus, choi_from_unitary, channel_rank, compose, is_tpcp, kraus_from_choi, tensor,
    ChoiMatrix,
};
use qpd::linalg::{self, frobenius};
use qpd::noise::amplitude_damping_kraus;
use qpd::qpd::{diamond_distance, TradeoffCurve};

fn unitary(dim: usize, seed: u64) -> linalg::ComplexMatrix {
    linalg::haar_unitary(dim, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Convex, nonincreasing samples from `1` to `top`, zero at the end.
fn convex_curve(label: &str, top: f64, e0: f64, curvature: f64, n: usize) -> TradeoffCurve {
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            let g = 1.0 + t * (top - 1.0);
            (g, e0 * (1.0 - t).powf(curvature))
        })
        .collect();
    TradeoffCurve::new(label, samples).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unitary_channels_are_rank_one_tpcp(seed in any::<u64>(), two in any::<bool>()) {
        let d = if two { 4 } else { 2 };
        let ch = choi_from_unitary(&unitary(d, seed)).unwrap();
        prop_assert!(is_tpcp(&ch, 1e-10).is_tpcp());
        prop_assert_eq!(channel_rank(&ch).0, 1);
        prop_assert!((ch.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kraus_round_trip(seed in any::<u64>(), gamma in 0.0f64..1.0) {
        let u = unitary(2, seed);
        let ops: Vec<_> = amplitude_damping_kraus(gamma).iter().map(|k| k * &u).collect();
        let ch = choi_from_kraus(&ops).unwrap();
        let back = choi_from_kraus(&kraus_from_choi(&ch, 1e-14)).unwrap();
        prop_assert!(frobenius(&(ch.matrix() - back.matrix())) < 1e-10);
    }

    #[test]
    fn channel_action_matches_conjugation(seed in any::<u64>()) {
        let u = unitary(4, seed);
        let rho = linalg::random_density(4, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a));
        let got = apply_channel(&choi_from_unitary(&u).unwrap(), &rho).unwrap();
        prop_assert!(frobenius(&(got - &u * &rho * u.adjoint())) < 1e-10);
    }

    #[test]
    fn composing_with_the_inverse_gives_identity(seed in any::<u64>()) {
        let u = unitary(4, seed);
        let ch = compose(&choi_from_unitary(&u.adjoint()).unwrap(), &choi_from_unitary(&u).unwrap()).unwrap();
        prop_assert!(ch.distance(&ChoiMatrix::identity(2)) < 1e-10);
    }

    #[test]
    fn tensor_of_unitaries_is_kron(a in any::<u64>(), b in any::<u64>()) {
        let (ua, ub) = (unitary(2, a), unitary(2, b));
        let t = tensor(&choi_from_unitary(&ua).unwrap(), &choi_from_unitary(&ub).unwrap());
        let direct = choi_from_unitary(&linalg::kron(&ub, &ua)).unwrap();
        prop_assert!(t.distance(&direct) < 1e-10);
    }

    #[test]
    fn depolarizing_distance_is_closed_form(p in 0.0f64..0.5) {
        let d = diamond_distance(&ChoiMatrix::identity(1), &ChoiMatrix::depolarizing(1, p)).unwrap();
        prop_assert!((d - 1.5 * p).abs() < 1e-6, "{} vs {}", d, 1.5 * p);
    }

    #[test]
    fn curve_eval_interpolates_between_neighbours(
        top in 1.01f64..3.0, e0 in 1e-3f64..0.5, curvature in 1.0f64..3.0, g in 1.0f64..4.0,
    ) {
        let curve = convex_curve("c", top, e0, curvature, 9);
        let e = curve_eval(&curve, g).unwrap();
        let s = &curve.samples;
        let hi = s.iter().position(|p| p.0 >= g).unwrap_or(s.len() - 1);
        let lo = hi.saturating_sub(1);
        prop_assert!(e <= s[lo].1 + 1e-15 && e >= s[hi].1 - 1e-15);
        for &(gk, ek) in s {
            prop_assert!((curve_eval(&curve, gk).unwrap() - ek).abs() < 1e-15);
        }
        prop_assert!(curve_eval(&curve, 0.5).is_err());
    }

    #[test]
    fn budget_meets_product_constraint(
        tops in proptest::collection::vec(1.01f64..1.5, 2..4),
        frac in 0.05f64..0.95,
    ) {
        let curves: Vec<_> = tops
            .iter()
            .enumerate()
            .map(|(i, &t)| convex_curve(&format!("g{i}"), t, 0.02 * (i + 1) as f64, 1.5, 11))
            .collect();
        let full: f64 = tops.iter().map(|t| t.ln()).sum();
        let total = (frac * full).exp();
        let a = optimize_budget(&curves, total).unwrap();
        prop_assert!(a.constraint_residual() <= 1e-9);
        for (b, t) in a.budgets.iter().zip(&tops) {
            prop_assert!(*b >= 1.0 - 1e-12 && *b <= t + 1e-9);
        }
        let uniform = total.powf(1.0 / tops.len() as f64);
        let uniform_obj: f64 = curves.iter().map(|c| curve_eval(c, uniform).unwrap()).sum();
        prop_assert!(a.objective <= uniform_obj + 1e-9);
    }
}

#[test]
fn non_tp_maps_are_flagged() {
    let half = choi_from_unitary(&unitary(2, 3)).unwrap().scaled(0.5);
    let v = is_tpcp(&half, 1e-9);
    assert!(v.completely_positive && !v.trace_preserving);
}
