//! Mitigated versus unmitigated ⟨ZZ⟩ on a noisy Bell-state circuit.

use qpd::channel::DensityMatrix;
use qpd::cli::{gate_assignment, pauli_observable};
use qpd::gates::{Circuit, GateSpec};
use qpd::noise::{simulate_state, NoiseModel};
use qpd::sampler::{sample_circuit, ObservableSpec, OutputMode};

fn main() -> qpd::error::Result<()> {
    let circuit = Circuit::from_gates(2, 2, vec![GateSpec::h(0), GateSpec::cnot(0, 1)])?;
    let nm = NoiseModel::depolarizing(0.05);
    let rho = DensityMatrix::zero_state(2);
    let obs = ObservableSpec::new(pauli_observable("ZZ", 2)?)?;

    let ideal = obs.expectation(&simulate_state(&circuit, &NoiseModel::noiseless(), &rho)?);
    println!("ideal ⟨ZZ⟩ = {ideal:.4}");
    println!("{}", qpd::sampler::EstimateReport::csv_header());
    for mitigate in [false, true] {
        let gates = gate_assignment(&circuit, &nm, mitigate)?;
        let r = sample_circuit(&rho, &gates, &obs, 200_000, 7, OutputMode::Bernoulli)?;
        println!("{}", r.csv_row());
    }
    Ok(())
}
