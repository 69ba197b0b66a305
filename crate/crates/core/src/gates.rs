//! Gate library and circuits on a linear qubit chain.
//!
//! Multi-qubit gates list their qubits in order; the first listed qubit is
//! the least significant bit of the gate's local matrix. For `CNOT` the
//! order is `[control, target]`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QpdError, Result};
use crate::linalg::{self, c, from_rows, ComplexMatrix, I, ONE, ZERO};

pub const MAX_QUBITS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    H,
    S,
    P0,
    X,
    Y,
    Z,
    Ry(f64),
    Rz(f64),
    Cnot,
    Swap,
}

impl GateKind {
    pub fn parse(name: &str, angle: Option<f64>) -> Result<Self> {
        let need_angle = || angle.ok_or_else(|| QpdError::InvalidInput(format!("gate `{name}` needs an angle")));
        let kind = match name.to_ascii_uppercase().as_str() {
            "H" => GateKind::H,
            "S" => GateKind::S,
            "P0" => GateKind::P0,
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "RY" => GateKind::Ry(need_angle()?),
            "RZ" => GateKind::Rz(need_angle()?),
            "CNOT" | "CX" => GateKind::Cnot,
            "SWAP" => GateKind::Swap,
            _ => return Err(QpdError::UnknownGate(name.to_string())),
        };
        if angle.is_some() && !matches!(kind, GateKind::Ry(_) | GateKind::Rz(_)) {
            return Err(QpdError::InvalidInput(format!("gate `{name}` takes no angle")));
        }
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::P0 => "P0",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::Ry(_) => "Ry",
            GateKind::Rz(_) => "Rz",
            GateKind::Cnot => "CNOT",
            GateKind::Swap => "SWAP",
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match self {
            GateKind::Ry(t) | GateKind::Rz(t) => Some(*t),
            _ => None,
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Swap => 2,
            _ => 1,
        }
    }

    pub fn is_trace_preserving(&self) -> bool {
        !matches!(self, GateKind::P0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl GateSpec {
    pub fn new(kind: GateKind, qubits: &[usize]) -> Result<Self> {
        if qubits.len() != kind.arity() {
            return Err(QpdError::InvalidInput(format!(
                "{} acts on {} qubit(s), got {:?}",
                kind.name(),
                kind.arity(),
                qubits
            )));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(QpdError::InvalidInput(format!("{} on repeated qubit {}", kind.name(), qubits[0])));
        }
        if let Some(t) = kind.angle() {
            if !t.is_finite() {
                return Err(QpdError::InvalidInput("non-finite rotation angle".into()));
            }
        }
        Ok(Self { kind, qubits: qubits.to_vec() })
    }

    pub fn h(q: usize) -> Self {
        Self { kind: GateKind::H, qubits: vec![q] }
    }

    pub fn s(q: usize) -> Self {
        Self { kind: GateKind::S, qubits: vec![q] }
    }

    pub fn p0(q: usize) -> Self {
        Self { kind: GateKind::P0, qubits: vec![q] }
    }

    pub fn ry(q: usize, theta: f64) -> Self {
        Self { kind: GateKind::Ry(theta), qubits: vec![q] }
    }

    pub fn rz(q: usize, theta: f64) -> Self {
        Self { kind: GateKind::Rz(theta), qubits: vec![q] }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cnot, qubits: vec![control, target] }
    }

    pub fn swap(a: usize, b: usize) -> Self {
        Self { kind: GateKind::Swap, qubits: vec![a, b] }
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.kind.is_trace_preserving()
    }
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind.angle() {
            Some(t) => write!(f, "{}({t}) {:?}", self.kind.name(), self.qubits),
            None => write!(f, "{} {:?}", self.kind.name(), self.qubits),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateRepr {
    name: String,
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
}

impl Serialize for GateSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GateRepr { name: self.kind.name().to_string(), qubits: self.qubits.clone(), angle: self.kind.angle() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GateSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GateRepr::deserialize(d)?;
        let kind = GateKind::parse(&r.name, r.angle).map_err(serde::de::Error::custom)?;
        GateSpec::new(kind, &r.qubits).map_err(serde::de::Error::custom)
    }
}

/// Local matrix of a gate (the projector for `P0`).
pub fn gate_unitary(g: &GateSpec) -> ComplexMatrix {
    gate_matrix(&g.kind)
}

pub fn gate_matrix(kind: &GateKind) -> ComplexMatrix {
    let h = FRAC_1_SQRT_2;
    match *kind {
        GateKind::H => linalg::from_real_rows(&[&[h, h], &[h, -h]]),
        GateKind::S => from_rows(&[&[ONE, ZERO], &[ZERO, I]]),
        GateKind::P0 => linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
        GateKind::X => pauli_x(),
        GateKind::Y => pauli_y(),
        GateKind::Z => pauli_z(),
        GateKind::Ry(t) => {
            let (s, co) = (0.5 * t).sin_cos();
            linalg::from_real_rows(&[&[co, -s], &[s, co]])
        }
        GateKind::Rz(t) => {
            let (s, co) = (0.5 * t).sin_cos();
            from_rows(&[&[c(co, -s), ZERO], &[ZERO, c(co, s)]])
        }
        GateKind::Cnot => permutation(&[0, 3, 2, 1]),
        GateKind::Swap => permutation(&[0, 2, 1, 3]),
    }
}

fn permutation(image: &[usize]) -> ComplexMatrix {
    let d = image.len();
    let mut m = ComplexMatrix::zeros(d, d);
    for (col, &row) in image.iter().enumerate() {
        m[(row, col)] = ONE;
    }
    m
}

pub fn pauli_x() -> ComplexMatrix {
    linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> ComplexMatrix {
    from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn pauli_z() -> ComplexMatrix {
    linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

pub fn paulis() -> [ComplexMatrix; 4] {
    [linalg::identity(2), pauli_x(), pauli_y(), pauli_z()]
}

/// All `4^k` Pauli strings on `k` qubits (qubit 0 is the fastest index).
pub fn pauli_strings(k: usize) -> Vec<ComplexMatrix> {
    let p = paulis();
    let mut out = vec![linalg::identity(1)];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * 4);
        for high in &p {
            for low in &out {
                next.push(linalg::kron(high, low));
            }
        }
        out = next;
    }
    out
}

/// Ordered gate list on `n_qubits` with linear connectivity. Qubits
/// `0..n_data` carry the map's input and output; the rest are ancillas that
/// start in `|0⟩` and are traced out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circuit {
    n_qubits: usize,
    n_data: usize,
    gates: Vec<GateSpec>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_data: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS || n_data == 0 || n_data > n_qubits {
            return Err(QpdError::InvalidInput(format!(
                "circuit needs 1 ≤ n_data ≤ n_qubits ≤ {MAX_QUBITS}, got n_qubits={n_qubits}, n_data={n_data}"
            )));
        }
        Ok(Self { n_qubits, n_data, gates: Vec::new() })
    }

    pub fn from_gates(n_qubits: usize, n_data: usize, gates: Vec<GateSpec>) -> Result<Self> {
        let mut c = Self::new(n_qubits, n_data)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, g: GateSpec) -> Result<()> {
        if let Some(&q) = g.qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(QpdError::InvalidInput(format!("qubit {q} outside a {}-qubit circuit", self.n_qubits)));
        }
        if g.qubits.len() == 2 && g.qubits[0].abs_diff(g.qubits[1]) != 1 {
            return Err(QpdError::Connectivity(format!("{g} acts on non-adjacent qubits")));
        }
        self.gates.push(g);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn gates(&self) -> &[GateSpec] {
        &self.gates
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.gates.iter().all(GateSpec::is_trace_preserving)
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::Cnot).count()
    }

    /// Product of all gate matrices on the full register, last gate leftmost.
    pub fn operator(&self) -> ComplexMatrix {
        let d = 1 << self.n_qubits;
        let mut u = linalg::identity(d);
        for g in &self.gates {
            u = linalg::embed_operator(&gate_unitary(g), &g.qubits, self.n_qubits) * u;
        }
        u
    }
}

/// One row of the single-qubit standard basis.
#[derive(Debug, Clone, Copy)]
pub struct BasisElement {
    pub label: &'static str,
    /// Gate sequence as an operator product: the leftmost factor acts last.
    pub sequence: &'static str,
}

pub const STANDARD_BASIS: [BasisElement; 16] = [
    BasisElement { label: "I", sequence: "" },
    BasisElement { label: "X", sequence: "H S S H" },
    BasisElement { label: "Y", sequence: "H S S H S S" },
    BasisElement { label: "Z", sequence: "S S" },
    BasisElement { label: "Rx", sequence: "H S S S H" },
    BasisElement { label: "Ry", sequence: "S H S S S H S S S" },
    BasisElement { label: "Rz", sequence: "S S S" },
    BasisElement { label: "Ryz", sequence: "H S S S H S S" },
    BasisElement { label: "Rzx", sequence: "S S S H S S S H S S S" },
    BasisElement { label: "Rxy", sequence: "H S S H S S S" },
    BasisElement { label: "piX", sequence: "S H S H P0 H S S S H S S S" },
    BasisElement { label: "piY", sequence: "H S S S H P0 H S H" },
    BasisElement { label: "piZ", sequence: "P0" },
    BasisElement { label: "piYZ", sequence: "S H S H P0 H S H S S S" },
    BasisElement { label: "piZX", sequence: "H S S S H P0 H S H S S" },
    BasisElement { label: "piXY", sequence: "P0 H S S H" },
];

impl BasisElement {
    /// Gates in execution order on qubit `q`.
    pub fn gates_on(&self, q: usize) -> Vec<GateSpec> {
        self.sequence
            .split_whitespace()
            .rev()
            .map(|tok| match tok {
                "H" => GateSpec::h(q),
                "S" => GateSpec::s(q),
                "P0" => GateSpec::p0(q),
                _ => unreachable!("fixed table"),
            })
            .collect()
    }

    /// The operator `A` with `[A](ρ) = A ρ A†`.
    pub fn closed_form(&self) -> ComplexMatrix {
        let [id, x, y, z] = paulis();
        let r = FRAC_1_SQRT_2;
        let half = 0.5;
        match self.label {
            "I" => id,
            "X" => x,
            "Y" => y,
            "Z" => z,
            "Rx" => (id + x * I).scale(r),
            "Ry" => (id + y * I).scale(r),
            "Rz" => (id + z * I).scale(r),
            "Ryz" => (y + z).scale(r),
            "Rzx" => (z + x).scale(r),
            "Rxy" => (x + y).scale(r),
            "piX" => (id + x).scale(half),
            "piY" => (id + y).scale(half),
            "piZ" => (id + z).scale(half),
            "piYZ" => (y + z * I).scale(half),
            "piZX" => (z + x * I).scale(half),
            "piXY" => (x + y * I).scale(half),
            _ => unreachable!("fixed table"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{choi_from_operator, ChoiMatrix};
    use crate::linalg::frobenius;

    fn sequence_channel(e: &BasisElement) -> ChoiMatrix {
        let c = Circuit::from_gates(1, 1, e.gates_on(0)).unwrap();
        choi_from_operator(&c.operator()).unwrap()
    }

    #[test]
    fn table_sequences_match_closed_forms() {
        for e in &STANDARD_BASIS {
            let seq = sequence_channel(e);
            let closed = choi_from_operator(&e.closed_form()).unwrap();
            assert!(seq.distance(&closed) < 1e-12, "{}", e.label);
        }
    }

    #[test]
    fn ry_zero_is_identity() {
        assert!(frobenius(&(gate_matrix(&GateKind::Ry(0.0)) - linalg::identity(2))) < 1e-15);
    }

    #[test]
    fn s_has_order_four() {
        let s = gate_matrix(&GateKind::S);
        let s4 = &s * &s * &s * &s;
        assert!(frobenius(&(s4 - linalg::identity(2))) < 1e-12);
    }

    #[test]
    fn swap_is_three_cnots() {
        let mut c = Circuit::new(2, 2).unwrap();
        c.push(GateSpec::cnot(0, 1)).unwrap();
        c.push(GateSpec::cnot(1, 0)).unwrap();
        c.push(GateSpec::cnot(0, 1)).unwrap();
        let swap = linalg::embed_operator(&gate_matrix(&GateKind::Swap), &[0, 1], 2);
        assert!(frobenius(&(c.operator() - swap)) < 1e-12);
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        // |control=1, target=0⟩ is index 1 with control on qubit 0.
        let u = linalg::embed_operator(&gate_matrix(&GateKind::Cnot), &[0, 1], 2);
        assert_eq!(u[(3, 1)], ONE);
        let reversed = linalg::embed_operator(&gate_matrix(&GateKind::Cnot), &[1, 0], 2);
        assert_eq!(reversed[(3, 2)], ONE);
    }

    #[test]
    fn connectivity_and_arity_checks() {
        let mut c = Circuit::new(3, 2).unwrap();
        assert!(matches!(c.push(GateSpec::cnot(0, 2)), Err(QpdError::Connectivity(_))));
        assert!(c.push(GateSpec::h(3)).is_err());
        assert!(GateSpec::new(GateKind::Cnot, &[1, 1]).is_err());
        assert!(GateSpec::new(GateKind::H, &[0, 1]).is_err());
        assert!(matches!(GateKind::parse("T", None), Err(QpdError::UnknownGate(_))));
        assert!(Circuit::new(5, 1).is_err());
    }

    #[test]
    fn gate_json_round_trip() {
        let g = GateSpec::ry(1, 0.25);
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"name":"Ry","qubits":[1],"angle":0.25}"#);
        assert_eq!(serde_json::from_str::<GateSpec>(&text).unwrap(), g);
        assert!(serde_json::from_str::<GateSpec>(r#"{"name":"Ry","qubits":[0]}"#).is_err());
    }

    #[test]
    fn pauli_strings_are_orthogonal() {
        let ps = pauli_strings(2);
        assert_eq!(ps.len(), 16);
        for (a, p) in ps.iter().enumerate() {
            for (b, q) in ps.iter().enumerate() {
                let ip = linalg::trace(&(p.adjoint() * q)).re;
                assert!((ip - if a == b { 4.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
