//! One-shot attack analysis: the schedule oracle's verdict for a coalition
//! placement plus an optional batch of full simulations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::adversary::{flip_feasibility, liu_distance_set, CoalitionSpec};
use crate::error::Result;
use crate::key::Key;
use crate::protocol::{build_topology, ProtocolConfig};

use super::runner::run_scenario;
use super::scenario::{Assertions, Scenario};

/// Oracle verdict and simulated outcome for one coalition placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackAnalysis {
    pub n: usize,
    pub t: usize,
    pub members: Vec<usize>,
    pub expected: String,
    /// Favorable ring distances for two-member coalitions at t = 1.
    pub liu_distances: Vec<usize>,
    pub known_final_key_period: Option<u32>,
    pub completion_period: u32,
    pub flip_overall: bool,
    pub flippable_owners: Vec<usize>,
    pub unflippable_owners: Vec<usize>,
    pub repetitions: usize,
    pub coalition_success_rate: Option<f64>,
    pub coincidental_success_rate: Option<f64>,
    pub mean_detection_events: Option<f64>,
    pub seed: u64,
}

/// Simulation parameters for [`analyze_attack`].
#[derive(Debug, Clone)]
pub struct AttackRunOptions {
    /// Simulated sessions; 0 runs the oracle only.
    pub repetitions: usize,
    pub seed: u64,
    pub decoys_per_hop: usize,
    pub error_threshold: f64,
}

impl Default for AttackRunOptions {
    fn default() -> Self {
        AttackRunOptions {
            repetitions: 100,
            seed: 0,
            decoys_per_hop: 4,
            error_threshold: 0.0,
        }
    }
}

/// Run the schedule oracle for the given placement and, when
/// `options.repetitions` is nonzero, a batch of full quantum-level
/// simulations.
pub fn analyze_attack(
    n: usize,
    t: usize,
    members: BTreeSet<usize>,
    expected: Key,
    options: &AttackRunOptions,
) -> Result<AttackAnalysis> {
    let key_length = expected.len();
    let spec = CoalitionSpec::liu(members.iter().copied(), expected.clone());
    spec.validate(n, key_length)?;
    let topology = build_topology(n, t)?;
    let report = flip_feasibility(&topology, &spec)?;

    let mut analysis = AttackAnalysis {
        n,
        t,
        members: members.iter().copied().collect(),
        expected: expected.to_hex(),
        liu_distances: liu_distance_set(n).into_iter().collect(),
        known_final_key_period: report.known_at,
        completion_period: topology.completion_period(),
        flip_overall: report.overall,
        flippable_owners: report
            .per_owner
            .iter()
            .filter(|(_, &ok)| ok)
            .map(|(&owner, _)| owner)
            .collect(),
        unflippable_owners: report
            .per_owner
            .iter()
            .filter(|(_, &ok)| !ok)
            .map(|(&owner, _)| owner)
            .collect(),
        repetitions: options.repetitions,
        coalition_success_rate: None,
        coincidental_success_rate: None,
        mean_detection_events: None,
        seed: options.seed,
    };

    if options.repetitions > 0 {
        let scenario = Scenario {
            label: "attack".into(),
            config: ProtocolConfig {
                n_parties: n,
                resistance: t,
                key_length,
                decoys_per_hop: options.decoys_per_hop,
                seed: options.seed,
                error_threshold: options.error_threshold,
            },
            adversary: Some(spec),
            repetitions: options.repetitions,
            assertions: Assertions::default(),
        };
        let aggregate = run_scenario(&scenario)?;
        analysis.coalition_success_rate = aggregate.coalition_success_rate;
        analysis.coincidental_success_rate = aggregate.coincidental_success_rate;
        analysis.mean_detection_events = Some(aggregate.mean_detection_events);
    }
    Ok(analysis)
}

pub const ATTACK_COLUMNS: [&str; 15] = [
    "n",
    "t",
    "members",
    "expected",
    "liu_distances",
    "known_final_key_period",
    "completion_period",
    "flip_overall",
    "flippable_owners",
    "unflippable_owners",
    "repetitions",
    "coalition_success_rate",
    "coincidental_success_rate",
    "mean_detection_events",
    "seed",
];

impl AttackAnalysis {
    pub fn to_json_line(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("attack analysis serializes");
        out.push(b'\n');
        out
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let join = |xs: &[usize]| {
            xs.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(";")
        };
        let opt_num = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        let fields = [
            self.n.to_string(),
            self.t.to_string(),
            join(&self.members),
            self.expected.clone(),
            join(&self.liu_distances),
            self.known_final_key_period
                .map_or_else(String::new, |p| p.to_string()),
            self.completion_period.to_string(),
            self.flip_overall.to_string(),
            join(&self.flippable_owners),
            join(&self.unflippable_owners),
            self.repetitions.to_string(),
            opt_num(self.coalition_success_rate),
            opt_num(self.coincidental_success_rate),
            opt_num(self.mean_detection_events),
            self.seed.to_string(),
        ];
        format!("{}\n{}\n", ATTACK_COLUMNS.join(","), fields.join(",")).into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_analysis_forces_the_expected_key() {
        let options = AttackRunOptions {
            repetitions: 50,
            seed: 7,
            ..AttackRunOptions::default()
        };
        let analysis = analyze_attack(
            6,
            1,
            BTreeSet::from([0, 3]),
            Key::from_hex("a5a5a5a5").unwrap(),
            &options,
        )
        .unwrap();
        assert_eq!(analysis.known_final_key_period, Some(4));
        assert_eq!(analysis.completion_period, 6);
        assert!(analysis.flip_overall);
        assert_eq!(analysis.flippable_owners, vec![1, 2, 4, 5]);
        assert!(analysis.unflippable_owners.is_empty());
        assert_eq!(analysis.coalition_success_rate, Some(1.0));
        assert_eq!(analysis.mean_detection_events, Some(0.0));
        assert_eq!(analysis.liu_distances, vec![3]);
    }

    #[test]
    fn oracle_only_run_skips_simulation() {
        let options = AttackRunOptions {
            repetitions: 0,
            seed: 1,
            ..AttackRunOptions::default()
        };
        let analysis = analyze_attack(
            6,
            3,
            BTreeSet::from([0, 3]),
            Key::from_hex("ff00ff00").unwrap(),
            &options,
        )
        .unwrap();
        assert!(!analysis.flip_overall);
        assert_eq!(analysis.coalition_success_rate, None);
        assert_eq!(analysis.known_final_key_period, Some(3));
    }

    #[test]
    fn serialized_forms_are_stable() {
        let options = AttackRunOptions {
            repetitions: 0,
            seed: 9,
            ..AttackRunOptions::default()
        };
        let analysis = analyze_attack(
            4,
            1,
            BTreeSet::from([0, 2]),
            Key::from_hex("0f").unwrap(),
            &options,
        )
        .unwrap();
        let json = analysis.to_json_line();
        let parsed: AttackAnalysis =
            serde_json::from_slice(json.strip_suffix(b"\n").unwrap()).unwrap();
        assert_eq!(parsed, analysis);
        let csv = String::from_utf8(analysis.to_csv()).unwrap();
        assert!(csv.starts_with("n,t,members"));
        assert_eq!(csv.lines().count(), 2);
    }
}
