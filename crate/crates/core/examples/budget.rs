//! Splits a total γ budget between an Ry gate and a CNOT.

use qpd::budget::{exact_budget, optimize_budget};
use qpd::channel::choi_from_operator;
use qpd::cli::gate_set;
use qpd::gates::{Circuit, GateSpec};
use qpd::noise::NoiseModel;
use qpd::qpd::{budget_grid, exact_qpd, tradeoff_curve, PhysicalityFlags};

fn main() -> qpd::error::Result<()> {
    let nm = NoiseModel::depolarizing(0.02);
    let mut curves = Vec::new();
    let mut full = 1.0;
    for g in [GateSpec::ry(0, 0.4), GateSpec::cnot(0, 1)] {
        let k = g.qubits.len();
        let label = g.to_string();
        let circuit = Circuit::from_gates(k, k, vec![g])?;
        let target = choi_from_operator(&circuit.operator())?;
        let set = gate_set(&circuit, &nm)?;
        let gopt = exact_qpd(&target, &set)?.gamma;
        let curve = tradeoff_curve(&label, &target, &set, &budget_grid(gopt, 9), PhysicalityFlags::TPCP)?;
        full *= exact_budget(&curve)?;
        curves.push(curve);
    }
    println!("{}", qpd::budget::BudgetAllocation::csv_header());
    for total in [1.0, 1.01, full.sqrt(), full] {
        print!("{}", optimize_budget(&curves, total)?.csv_rows());
    }
    Ok(())
}
