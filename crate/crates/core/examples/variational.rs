//! Fits the hardware-efficient ansatz to the Stinespring isometry of an
//! amplitude-damping channel at increasing depth.

use qpd::channel::choi_from_kraus;
use qpd::noise::amplitude_damping_kraus;
use qpd::variational::{stinespring_isometry, variational_fit};

fn main() -> qpd::error::Result<()> {
    let channel = choi_from_kraus(&amplitude_damping_kraus(0.3))?;
    let dilation = stinespring_isometry(&channel, 2)?;
    println!("isometry {}×{} on {} ancilla", dilation.isometry.nrows(), dilation.isometry.ncols(), dilation.ancillas);
    for depth in 1..=4 {
        let fit = variational_fit(&dilation.isometry, depth, 4, 1)?;
        println!("depth {depth}: ‖V − V(θ)‖_F = {:.3e} with {} CNOTs", fit.objective, fit.circuit.cnot_count());
    }
    Ok(())
}
