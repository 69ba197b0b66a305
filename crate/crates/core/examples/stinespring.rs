//! Grows a decomposition set for a noisy Ry gate from Stinespring dilations
//! of the residual and compares γ with the inverse-channel optimum.

use qpd::channel::choi_from_operator;
use qpd::gates::{Circuit, GateSpec};
use qpd::noise::{NoiseModel, NoiseOracle};
use qpd::stinespring::{optimal_gamma, run_stinespring, StinespringConfig};

fn main() -> qpd::error::Result<()> {
    let circuit = Circuit::from_gates(1, 1, vec![GateSpec::ry(0, 0.9)])?;
    let nm = NoiseModel::depolarizing(0.1).with_p1(0.03);
    let cfg = StinespringConfig { depth: 2, ..StinespringConfig::for_qubits(1) };

    let run = run_stinespring(&circuit, &nm, &cfg)?;
    for r in &run.trace.records {
        println!(
            "round {}: Δ = {:.3e}  γ = {:.6}  set = {}  added = {}",
            r.iteration, r.delta_norm, r.gamma, r.set_size, r.channels_added
        );
    }
    let best = optimal_gamma(&choi_from_operator(&circuit.operator())?, &nm.realize(&circuit)?)?;
    println!("{:?}: γ = {:.6}, γ_opt = {best:.6}, {} elements", run.status, run.qpd.gamma, run.set.len());
    Ok(())
}
