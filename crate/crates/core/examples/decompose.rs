//! Exact and budget-limited QPDs of a noisy Hadamard.

use qpd::channel::choi_from_operator;
use qpd::cli::gate_set;
use qpd::gates::{Circuit, GateSpec};
use qpd::noise::NoiseModel;
use qpd::qpd::{approximate_qpd, exact_qpd, PhysicalityFlags, QuasiprobabilityDecomposition};

fn show(title: &str, q: &QuasiprobabilityDecomposition) {
    println!("{title}: γ = {:.6}, error = {:.3e}", q.gamma, q.residual);
    for item in q.items.iter().filter(|i| i.coefficient.abs() > 1e-9) {
        println!("  {:>+.6}  {}", item.coefficient, item.label);
    }
}

fn main() -> qpd::error::Result<()> {
    let circuit = Circuit::from_gates(1, 1, vec![GateSpec::h(0)])?;
    let target = choi_from_operator(&circuit.operator())?;
    let set = gate_set(&circuit, &NoiseModel::depolarizing(0.1).with_p1(0.05))?;

    let exact = exact_qpd(&target, &set)?;
    show("exact", &exact);
    let half = 1.0 + 0.5 * (exact.gamma - 1.0);
    show("half budget", &approximate_qpd(&target, &set, half, PhysicalityFlags::TPCP)?);
    Ok(())
}
