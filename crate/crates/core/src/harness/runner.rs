//! Scenario execution: repeated sessions with derived seeds, verdict
//! evaluation and aggregation.

use rand::{Rng, SeedableRng};

use crate::adversary::{execute_strategy, CoalitionSpec};
use crate::error::Result;
use crate::key::Key;
use crate::protocol::{build_topology, run_session, PartyStatus, ProtocolConfig, SessionRng};

use super::scenario::Scenario;

/// Keyed mix of (master seed, repetition index); SplitMix64 finalizer.
pub fn derive_rep_seed(master: u64, repetition: u64) -> u64 {
    let mut z = master ^ repetition.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-run outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartyOutcome {
    Accepted(Key),
    Aborted,
}

/// Everything the harness records about one session run.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub parties: Vec<PartyOutcome>,
    /// All honest parties accepted with identical final keys.
    pub honest_agreement: bool,
    /// All honest parties output the coalition's expected key with no
    /// abort, and the expected key differs from the true XOR (coincidences
    /// are tracked separately).
    pub coalition_success: Option<bool>,
    /// The expected key happened to equal the true final key.
    pub coincidental_match: Option<bool>,
    /// Failed hop detections in this run.
    pub detection_events: usize,
    /// First period the coalition knew the final key (final period when it
    /// only learns at its own measurement).
    pub known_at: Option<u32>,
    pub completion_period: Option<u32>,
}

/// Run one session with freshly provided keys and evaluate the verdict.
pub fn run_once(
    config: &ProtocolConfig,
    keys: &[Key],
    adversary: Option<&CoalitionSpec>,
) -> Result<Verdict> {
    let topology = build_topology(config.n_parties, config.resistance)?;
    let mut hooks = execute_strategy(adversary, &topology, config.key_length)?;
    let outcome = run_session(config, keys, hooks.as_mut())?;

    let mut true_final = Key::zero(config.key_length);
    for key in keys {
        true_final.xor_in_place(key);
    }

    let members = adversary.and_then(CoalitionSpec::members);
    let is_honest = |i: usize| members.is_none_or(|m| !m.contains(&i));

    let parties: Vec<PartyOutcome> = outcome
        .statuses
        .iter()
        .zip(outcome.final_keys.iter())
        .map(|(status, key)| match (status, key) {
            (PartyStatus::Accepted, Some(key)) => PartyOutcome::Accepted(key.clone()),
            _ => PartyOutcome::Aborted,
        })
        .collect();

    let honest_keys: Vec<&Key> = parties
        .iter()
        .enumerate()
        .filter(|(i, _)| is_honest(*i))
        .filter_map(|(_, outcome)| match outcome {
            PartyOutcome::Accepted(key) => Some(key),
            PartyOutcome::Aborted => None,
        })
        .collect();
    let honest_total = (0..config.n_parties).filter(|&i| is_honest(i)).count();
    let honest_agreement = honest_keys.len() == honest_total
        && honest_keys.windows(2).all(|w| w[0] == w[1]);

    let (coalition_success, coincidental_match, known_at) = match adversary {
        Some(CoalitionSpec::LiuCollusion { expected, .. }) => {
            let forced =
                honest_agreement && honest_keys.iter().all(|key| *key == expected);
            let coincidence = expected == &true_final;
            (
                Some(forced && !coincidence),
                Some(forced && coincidence),
                outcome.known_final_key_at.or(outcome.completion_period),
            )
        }
        _ => (None, None, None),
    };

    Ok(Verdict {
        parties,
        honest_agreement,
        coalition_success,
        coincidental_match,
        detection_events: outcome.detection_failures,
        known_at,
        completion_period: outcome.completion_period,
    })
}

/// Aggregated verdicts over all repetitions of a scenario.
#[derive(Debug, Clone)]
pub struct VerdictAggregate {
    pub repetitions: usize,
    pub honest_agreement_rate: f64,
    pub coalition_success_rate: Option<f64>,
    pub coincidental_success_rate: Option<f64>,
    pub mean_detection_events: f64,
    pub verdicts: Vec<Verdict>,
}

/// Run every repetition of a scenario. Repetition `i` draws its keys and
/// session seed from `derive_rep_seed(master, i)`, so the whole aggregate is
/// reproducible from the scenario alone.
pub fn run_scenario(scenario: &Scenario) -> Result<VerdictAggregate> {
    scenario.validate()?;
    let mut verdicts = Vec::with_capacity(scenario.repetitions);
    for rep in 0..scenario.repetitions {
        let mut rep_rng =
            SessionRng::seed_from_u64(derive_rep_seed(scenario.config.seed, rep as u64));
        let keys: Vec<Key> = (0..scenario.config.n_parties)
            .map(|_| Key::random(scenario.config.key_length, &mut rep_rng))
            .collect();
        let mut config = scenario.config.clone();
        config.seed = rep_rng.random();
        verdicts.push(run_once(&config, &keys, scenario.adversary.as_ref())?);
    }

    let reps = verdicts.len() as f64;
    let honest_agreement_rate =
        verdicts.iter().filter(|v| v.honest_agreement).count() as f64 / reps;
    let mean_detection_events =
        verdicts.iter().map(|v| v.detection_events).sum::<usize>() as f64 / reps;
    let rate_of = |field: fn(&Verdict) -> Option<bool>| -> Option<f64> {
        verdicts
            .iter()
            .map(field)
            .collect::<Option<Vec<bool>>>()
            .map(|values| values.iter().filter(|&&b| b).count() as f64 / reps)
    };

    Ok(VerdictAggregate {
        repetitions: verdicts.len(),
        honest_agreement_rate,
        coalition_success_rate: rate_of(|v| v.coalition_success),
        coincidental_success_rate: rate_of(|v| v.coincidental_match),
        mean_detection_events,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::Assertions;
    use std::collections::BTreeSet;

    fn scenario(
        n: usize,
        t: usize,
        bits: usize,
        decoys: usize,
        seed: u64,
        reps: usize,
        adversary: Option<CoalitionSpec>,
    ) -> Scenario {
        Scenario {
            label: "test".into(),
            config: ProtocolConfig {
                n_parties: n,
                resistance: t,
                key_length: bits,
                decoys_per_hop: decoys,
                seed,
                error_threshold: 0.0,
            },
            adversary,
            repetitions: reps,
            assertions: Assertions::default(),
        }
    }

    #[test]
    fn rep_seeds_are_spread_out() {
        let a = derive_rep_seed(42, 0);
        let b = derive_rep_seed(42, 1);
        let c = derive_rep_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_rep_seed(42, 0));
    }

    #[test]
    fn honest_scenario_has_full_agreement() {
        let agg = run_scenario(&scenario(5, 2, 16, 4, 7, 20, None)).unwrap();
        assert_eq!(agg.honest_agreement_rate, 1.0);
        assert_eq!(agg.coalition_success_rate, None);
        assert_eq!(agg.mean_detection_events, 0.0);
        assert_eq!(agg.verdicts.len(), 20);
    }

    #[test]
    fn baseline_attack_scenario_succeeds_every_run() {
        let spec = CoalitionSpec::liu([0usize, 3], Key::from_hex("5aa5c33c").unwrap());
        let agg = run_scenario(&scenario(6, 1, 32, 8, 11, 25, Some(spec))).unwrap();
        assert_eq!(agg.coalition_success_rate, Some(1.0));
        assert_eq!(agg.coincidental_success_rate, Some(0.0));
        assert_eq!(agg.mean_detection_events, 0.0);
        for v in &agg.verdicts {
            assert_eq!(v.known_at, Some(4));
            assert_eq!(v.completion_period, Some(6));
        }
    }

    #[test]
    fn resistant_scenario_never_succeeds() {
        let spec = CoalitionSpec::liu([0usize, 3], Key::from_hex("5aa5c33c").unwrap());
        let agg = run_scenario(&scenario(6, 3, 32, 4, 13, 25, Some(spec))).unwrap();
        assert_eq!(agg.coalition_success_rate, Some(0.0));
        assert_eq!(agg.honest_agreement_rate, 1.0);
    }

    #[test]
    fn eve_scenario_detects_and_aborts() {
        let spec = CoalitionSpec::InterceptResendEve {
            channels: BTreeSet::from([(0, 1)]),
        };
        let agg = run_scenario(&scenario(4, 1, 8, 16, 17, 30, Some(spec))).unwrap();
        // 1 - (3/4)^16 per run; 30 runs make a miss overwhelmingly unlikely
        // to dominate.
        assert!(agg.mean_detection_events > 0.5);
        assert!(agg.honest_agreement_rate < 0.5);
        assert_eq!(agg.coalition_success_rate, None);
    }

    #[test]
    fn scenario_reruns_are_identical() {
        let spec = CoalitionSpec::liu([0usize, 2], Key::from_hex("0f0f").unwrap());
        let s = scenario(5, 1, 16, 4, 23, 10, Some(spec));
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        for (va, vb) in a.verdicts.iter().zip(b.verdicts.iter()) {
            assert_eq!(va.parties, vb.parties);
            assert_eq!(va.detection_events, vb.detection_events);
        }
    }
}
