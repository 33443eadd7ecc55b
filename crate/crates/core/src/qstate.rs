//! Minimal quantum kernel for the key-agreement simulator.
//!
//! The protocol only ever needs three physical ingredients, and this module
//! provides exactly those:
//!
//! 1. **Bell pairs.** Each key bit travels as one maximally entangled pair
//!    `(|00> + |11>)/sqrt(2)`, split into a *home* half (kept by the owner)
//!    and a *travel* half (sent around the circle). Measuring both halves in
//!    the Z basis yields perfectly correlated bits for a fresh pair.
//! 2. **Pauli encoding.** A participant encodes the key bit `b` by applying
//!    `X^b` to the travel half. Every `X` flips the Z-correlation of the
//!    pair, so after the full trip `r XOR s` equals the XOR of all encoded
//!    bits. `Z`-type operations change only phases and never the statistics
//!    of `r XOR s`.
//! 3. **Decoy qubits.** Single qubits prepared in a random BB84 state
//!    (`|0>`, `|1>`, `|+>`, `|->`) are interleaved with the travel halves on
//!    every hop. An intercept-resend eavesdropper guessing the basis
//!    disturbs each decoy with probability exactly 1/4.
//!
//! States are dense complex vectors of dimension 2 or 4; the protocol never
//! entangles across pairs, so no larger Hilbert space exists here. Global
//! phase carries no information and is discarded after every operation,
//! which keeps state equality well-defined for tests.
//!
//! All randomness flows through an explicitly passed random stream, so a
//! seeded caller is fully deterministic.

use num_complex::Complex64;
use rand::Rng;

/// Tolerance for normalization and amplitude comparisons.
pub const NORM_TOLERANCE: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Preparation/measurement basis for single qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Basis {
    /// Computational basis `{|0>, |1>}`.
    Z,
    /// Hadamard basis `{|+>, |->}`.
    X,
}

impl Basis {
    /// Uniformly random basis choice.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random_bool(0.5) {
            Basis::Z
        } else {
            Basis::X
        }
    }
}

/// The single-qubit Pauli operations used for key encoding.
///
/// `XZ` denotes applying `Z` first and `X` second. Up to the discarded
/// global phase, `X.X = Z.Z = (XZ).(XZ) = I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliOp {
    I,
    X,
    Z,
    XZ,
}

impl PauliOp {
    /// Whether the operation flips the computational-basis bit.
    pub fn flips_bit(self) -> bool {
        matches!(self, PauliOp::X | PauliOp::XZ)
    }

    /// The encoding operation for one key bit: `X` for 1, `I` for 0.
    pub fn for_bit(bit: bool) -> Self {
        if bit {
            PauliOp::X
        } else {
            PauliOp::I
        }
    }
}

/// A single qubit, e.g. one decoy state.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    amps: [Complex64; 2],
}

/// One entangled pair. Amplitudes are indexed by `home_bit * 2 + travel_bit`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    amps: [Complex64; 4],
}

/// A decoy the sender remembers and later announces: where it sits in the
/// payload, and how it was prepared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoyRecord {
    pub position: usize,
    pub basis: Basis,
    pub bit: bool,
}

/// Prepare a fresh maximally entangled pair `(|00> + |11>)/sqrt(2)`.
pub fn prepare_pair() -> PairState {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    PairState {
        amps: [h, zero, zero, h],
    }
}

/// Prepare a decoy qubit: `Z` basis gives `|0>`/`|1>`, `X` basis gives
/// `(|0> +/- |1>)/sqrt(2)`.
pub fn prepare_decoy(basis: Basis, bit: bool) -> QubitState {
    let amps = match (basis, bit) {
        (Basis::Z, false) => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        (Basis::Z, true) => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        (Basis::X, false) => [
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(FRAC_1_SQRT_2, 0.0),
        ],
        (Basis::X, true) => [
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(-FRAC_1_SQRT_2, 0.0),
        ],
    };
    QubitState { amps }
}

/// Measure-and-forward attack on a single qubit: measure in `guess_basis`
/// and resend the collapsed eigenstate.
pub fn intercept_resend<R: Rng + ?Sized>(
    q: &QubitState,
    guess_basis: Basis,
    rng: &mut R,
) -> (bool, QubitState) {
    let mut resent = q.clone();
    let observed = resent.measure(guess_basis, rng);
    (observed, resent)
}

impl QubitState {
    pub fn amplitudes(&self) -> &[Complex64; 2] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Born-rule measurement in `basis`; the state collapses onto the
    /// observed eigenstate.
    pub fn measure<R: Rng + ?Sized>(&mut self, basis: Basis, rng: &mut R) -> bool {
        match basis {
            Basis::Z => {
                let p1 = self.amps[1].norm_sqr();
                let bit = rng.random::<f64>() < p1;
                *self = prepare_decoy(Basis::Z, bit);
                bit
            }
            Basis::X => {
                let minus = (self.amps[0] - self.amps[1]) * FRAC_1_SQRT_2;
                let p_minus = minus.norm_sqr();
                let bit = rng.random::<f64>() < p_minus;
                *self = prepare_decoy(Basis::X, bit);
                bit
            }
        }
    }
}

impl PairState {
    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Apply a Pauli to the travel half only. Norm is preserved and global
    /// phase discarded.
    pub fn apply_travel_pauli(&mut self, op: PauliOp) {
        match op {
            PauliOp::I => {}
            PauliOp::X => self.travel_x(),
            PauliOp::Z => self.travel_z(),
            PauliOp::XZ => {
                self.travel_z();
                self.travel_x();
            }
        }
        self.canonicalize_phase();
    }

    fn travel_x(&mut self) {
        self.amps.swap(0, 1);
        self.amps.swap(2, 3);
    }

    fn travel_z(&mut self) {
        self.amps[1] = -self.amps[1];
        self.amps[3] = -self.amps[3];
    }

    /// Measure both halves in the Z basis. Returns `(r, s)` where `r` is the
    /// home bit and `s` the travel bit; the state collapses to the observed
    /// product state.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (bool, bool) {
        let u = rng.random::<f64>();
        let mut acc = 0.0;
        let mut outcome = 3;
        for (i, a) in self.amps.iter().enumerate() {
            acc += a.norm_sqr();
            if u < acc {
                outcome = i;
                break;
            }
        }
        self.amps = [Complex64::new(0.0, 0.0); 4];
        self.amps[outcome] = Complex64::new(1.0, 0.0);
        (outcome >> 1 == 1, outcome & 1 == 1)
    }

    /// Measure only the travel half in `basis`; the joint state collapses
    /// under the corresponding projector. This is what an interceptor on the
    /// quantum channel can do to an in-flight travel qubit.
    pub fn measure_travel<R: Rng + ?Sized>(&mut self, basis: Basis, rng: &mut R) -> bool {
        match basis {
            Basis::Z => {
                let p1 = self.amps[1].norm_sqr() + self.amps[3].norm_sqr();
                let bit = rng.random::<f64>() < p1;
                let keep = usize::from(bit);
                let drop = 1 - keep;
                self.amps[drop] = Complex64::new(0.0, 0.0);
                self.amps[2 + drop] = Complex64::new(0.0, 0.0);
                self.renormalize();
                bit
            }
            Basis::X => {
                // Travel-half amplitudes in the X basis, per home bit.
                let plus = [
                    (self.amps[0] + self.amps[1]) * FRAC_1_SQRT_2,
                    (self.amps[2] + self.amps[3]) * FRAC_1_SQRT_2,
                ];
                let minus = [
                    (self.amps[0] - self.amps[1]) * FRAC_1_SQRT_2,
                    (self.amps[2] - self.amps[3]) * FRAC_1_SQRT_2,
                ];
                let p_minus = minus[0].norm_sqr() + minus[1].norm_sqr();
                let bit = rng.random::<f64>() < p_minus;
                let (branch, sign) = if bit { (minus, -1.0) } else { (plus, 1.0) };
                for (h, &home_amp) in branch.iter().enumerate() {
                    self.amps[2 * h] = home_amp * FRAC_1_SQRT_2;
                    self.amps[2 * h + 1] = home_amp * FRAC_1_SQRT_2 * sign;
                }
                self.renormalize();
                bit
            }
        }
    }

    fn renormalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        debug_assert!(norm > 0.0, "collapse onto zero-probability branch");
        for a in &mut self.amps {
            *a /= norm;
        }
        self.canonicalize_phase();
    }

    /// Rotate the state so the first non-negligible amplitude is real and
    /// positive. Global phase is unobservable; fixing it makes state
    /// equality meaningful.
    fn canonicalize_phase(&mut self) {
        let lead = self.amps.iter().find(|a| a.norm_sqr() > 1e-24);
        if let Some(&a) = lead {
            let phase = a / a.norm();
            if (phase - Complex64::new(1.0, 0.0)).norm_sqr() > 0.0 {
                let correction = phase.conj();
                for amp in &mut self.amps {
                    *amp *= correction;
                }
            }
        }
    }
}
