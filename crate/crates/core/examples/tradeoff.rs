//! Error-versus-γ curves for Ry, CNOT and SWAP under depolarizing noise,
//! printed as CSV.

use qpd::channel::choi_from_operator;
use qpd::cli::gate_set;
use qpd::gates::{Circuit, GateSpec};
use qpd::noise::NoiseModel;
use qpd::qpd::{budget_grid, exact_qpd, tradeoff_curve, PhysicalityFlags};

fn main() -> qpd::error::Result<()> {
    let nm = NoiseModel::depolarizing(0.02);
    let gates = [("ry", GateSpec::ry(0, 0.4)), ("cnot", GateSpec::cnot(0, 1)), ("swap", GateSpec::swap(0, 1))];
    for (name, g) in gates {
        let k = g.qubits.len();
        let circuit = Circuit::from_gates(k, k, vec![g])?;
        let target = choi_from_operator(&circuit.operator())?;
        let set = gate_set(&circuit, &nm)?;
        let exact = exact_qpd(&target, &set)?;
        println!("# {name}: γ_opt = {:.6} over {} channels", exact.gamma, set.len());
        let curve = tradeoff_curve(name, &target, &set, &budget_grid(exact.gamma, 6), PhysicalityFlags::TPCP)?;
        print!("{}", curve.to_csv());
    }
    Ok(())
}
