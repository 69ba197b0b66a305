//! Diamond distances of a few noisy channels from their ideal versions.

use qpd::channel::{choi_from_kraus, choi_from_unitary, compose, ChoiMatrix};
use qpd::gates::{gate_unitary, GateSpec};
use qpd::noise::{amplitude_damping_kraus, phase_damping_kraus};
use qpd::qpd::diamond_distance;

fn main() -> qpd::error::Result<()> {
    let id = ChoiMatrix::identity(1);
    for p in [0.01, 0.05, 0.2] {
        let d = diamond_distance(&id, &ChoiMatrix::depolarizing(1, p))?;
        println!("depolarizing p={p:<5} ‖I − D_p‖⋄ = {d:.6}  (3p/2 = {:.6})", 1.5 * p);
    }
    for g in [0.01, 0.1] {
        let ad = choi_from_kraus(&amplitude_damping_kraus(g))?;
        let pd = choi_from_kraus(&phase_damping_kraus(g))?;
        println!("amplitude damping {g:<5} {:.6}", diamond_distance(&id, &ad)?);
        println!("phase damping     {g:<5} {:.6}", diamond_distance(&id, &pd)?);
    }

    // Over-rotation error on a two-qubit circuit.
    let h = choi_from_unitary(&gate_unitary(&GateSpec::ry(0, 0.5)))?;
    let h2 = choi_from_unitary(&gate_unitary(&GateSpec::ry(0, 0.52)))?;
    let dep = ChoiMatrix::depolarizing(1, 0.01);
    println!("Ry(0.5) vs noisy Ry(0.52): {:.6}", diamond_distance(&h, &compose(&dep, &h2)?)?);
    Ok(())
}
