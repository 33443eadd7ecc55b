//! Qubit-efficiency measures, computed in exact rational arithmetic.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Qubit efficiency of a session: `1 / ((kappa + 1) * t * N)`, where `kappa`
/// is the detection rate (decoys per key qubit).
pub fn qubit_efficiency(n_parties: usize, resistance: usize, kappa: Ratio<u64>) -> Ratio<u64> {
    assert!(n_parties >= 2 && resistance >= 1);
    let scale = Ratio::from_integer((resistance * n_parties) as u64);
    ((kappa + Ratio::from_integer(1)) * scale).recip()
}

/// Cabello's efficiency measure `c / (q + b)`: message bits over qubits plus
/// decoding-classical bits.
pub fn cabello_efficiency(message_bits: u64, qubits: u64, classical_bits: u64) -> Result<Ratio<u64>> {
    let denom = qubits + classical_bits;
    if denom == 0 {
        return Err(Error::Domain(
            "cabello efficiency undefined for q + b = 0".into(),
        ));
    }
    Ok(Ratio::new(message_bits, denom))
}
