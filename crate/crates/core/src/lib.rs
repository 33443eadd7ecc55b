//! Deterministic simulator and analysis toolkit for circle-type multiparty
//! quantum key agreement (MQKA).
//!
//! The crate models N participants arranged on a circle who jointly agree on
//! a shared key by circulating entangled travel-qubit sequences. Each
//! participant splits its sequence into `t` sub-circles, which bounds how
//! early any coalition of dishonest participants can learn the final key.
//! On top of the protocol engine sit:
//!
//! - [`qstate`]: the quantum kernel (Bell pairs, Pauli encoding, BB84-style
//!   decoy states, intercept-resend disturbance);
//! - [`protocol`]: sub-circle topology construction, the lock-step session
//!   engine, and qubit-efficiency formulas;
//! - [`adversary`]: the two-stage collusion attack (key stealing, key
//!   flipping) and an analytic schedule oracle that predicts from topology
//!   alone whether a coalition can force the final key;
//! - [`harness`]: scenario files, Monte Carlo sweeps, and report emission.
//!
//! Everything is deterministic given a seed: identical configuration, keys,
//! seed and strategies produce bit-identical transcripts and reports.
//!
//! # Example
//!
//! ```
//! use mqka_core::adversary::{flip_feasibility, CoalitionSpec};
//! use mqka_core::key::Key;
//! use mqka_core::protocol::{build_topology, run_session, HonestHooks, ProtocolConfig};
//!
//! let config = ProtocolConfig {
//!     n_parties: 6,
//!     resistance: 3,
//!     key_length: 8,
//!     decoys_per_hop: 4,
//!     seed: 42,
//!     error_threshold: 0.0,
//! };
//! let keys: Vec<Key> = (0..6).map(|i| Key::from_hex(&format!("{i}{i}")).unwrap()).collect();
//!
//! // Honest run: everyone ends up with the XOR of all six keys.
//! let outcome = run_session(&config, &keys, &mut HonestHooks).unwrap();
//! let expected = keys.iter().fold(Key::zero(8), |acc, k| &acc ^ k);
//! assert!(outcome.final_keys.iter().all(|k| k.as_ref() == Some(&expected)));
//!
//! // Two colluders at the favorable ring distance cannot flip anyone at
//! // t = 3: the steal only completes when the session is already over.
//! let topology = build_topology(6, 3).unwrap();
//! let coalition = CoalitionSpec::liu([0usize, 3], Key::zero(8));
//! let report = flip_feasibility(&topology, &coalition).unwrap();
//! assert_eq!(report.known_at, Some(topology.completion_period()));
//! assert!(!report.overall);
//! ```

pub mod adversary;
pub mod error;
pub mod harness;
pub mod key;
pub mod protocol;
pub mod qstate;

pub use error::{Error, Result};
pub use key::Key;
pub use protocol::{
    cabello_efficiency, qubit_efficiency, ProtocolConfig, SessionState, Topology,
};
pub use adversary::{flip_feasibility, known_final_key_period, liu_distance_set, CoalitionSpec};
pub use harness::{run_scenario, ReportRow, Scenario};
