//! Grid expansion and parallel sweep execution.

use rayon::prelude::*;

use crate::adversary::CoalitionSpec;
use crate::error::{Error, Result};
use crate::protocol::ProtocolConfig;

use super::report::ReportRow;
use super::runner::run_scenario;
use super::scenario::{Assertions, PlacementAxis, Scenario, SweepGrid};

fn placement_label(members: Option<&std::collections::BTreeSet<usize>>) -> String {
    match members {
        None => "honest".to_string(),
        Some(set) => {
            let parts: Vec<String> = set.iter().map(ToString::to_string).collect();
            format!("m{}", parts.join("."))
        }
    }
}

/// Expand a grid into concrete scenarios, one per (n, t, placement) point.
/// Every point must be a valid configuration; an invalid combination is an
/// error rather than a silent skip.
pub fn expand_grid(grid: &SweepGrid) -> Result<Vec<Scenario>> {
    let mut scenarios = Vec::new();
    for &n in &grid.n_values {
        for &t in &grid.t_values {
            let placements: Vec<Option<CoalitionSpec>> = match &grid.placements {
                PlacementAxis::None => vec![None],
                PlacementAxis::AllPairs => {
                    let expected = grid.expected.clone().expect("validated at parse time");
                    let mut out = Vec::new();
                    for a in 0..n {
                        for b in a + 1..n {
                            out.push(Some(CoalitionSpec::liu([a, b], expected.clone())));
                        }
                    }
                    out
                }
                PlacementAxis::Explicit(members) => {
                    let expected = grid.expected.clone().expect("validated at parse time");
                    vec![Some(CoalitionSpec::liu(
                        members.iter().copied(),
                        expected.clone(),
                    ))]
                }
            };
            for adversary in placements {
                let label = format!(
                    "{} n{n} t{t} {}",
                    grid.label,
                    placement_label(adversary.as_ref().and_then(CoalitionSpec::members))
                );
                let scenario = Scenario {
                    label,
                    config: ProtocolConfig {
                        n_parties: n,
                        resistance: t,
                        key_length: grid.key_length,
                        decoys_per_hop: grid.decoys_per_hop,
                        seed: grid.seed,
                        error_threshold: grid.error_threshold,
                    },
                    adversary,
                    repetitions: grid.repetitions,
                    assertions: Assertions::default(),
                };
                scenario.validate()?;
                scenarios.push(scenario);
            }
        }
    }
    if scenarios.is_empty() {
        return Err(Error::Scenario("grid expands to no points".into()));
    }
    if scenarios.len() > grid.max_points {
        return Err(Error::ResourceLimit(format!(
            "grid expands to {} points, limit is {}",
            scenarios.len(),
            grid.max_points
        )));
    }
    Ok(scenarios)
}

/// Run every grid point. Points execute as independent parallel tasks; the
/// report is assembled in grid order, so the output is deterministic.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<ReportRow>> {
    let scenarios = expand_grid(grid)?;
    scenarios
        .par_iter()
        .map(|scenario| {
            let aggregate = run_scenario(scenario)?;
            Ok(ReportRow::from_aggregate(scenario, &aggregate))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::liu_distance_set;
    use crate::harness::scenario::parse_grid;
    use num_rational::Ratio;

    #[test]
    fn efficiency_columns_follow_the_closed_form() {
        // N=8, t in 1..=4, kappa=1 -> eta = 1/(2*t*8).
        let grid = parse_grid(
            "[grid]\nn = 8\nt = 1..4\ncoalitions = none\n\
             [run]\nkey_length = 8\ndecoys_per_hop = 8\nseed = 5\nrepetitions = 2\n",
        )
        .unwrap();
        let rows = sweep(&grid).unwrap();
        assert_eq!(rows.len(), 4);
        let expected = ["1/16", "1/32", "1/48", "1/64"];
        for (row, eta) in rows.iter().zip(expected) {
            assert_eq!(row.kappa, "1");
            assert_eq!(row.qubit_efficiency, eta);
            assert_eq!(row.coalition_success_rate, None);
            assert_eq!(row.honest_agreement_rate, 1.0);
        }
    }

    #[test]
    fn pair_sweep_reproduces_the_distance_law() {
        let grid = parse_grid(
            "[grid]\nn = 4..6\nt = 1\ncoalitions = pairs\nexpected = 3c5af00f\n\
             [run]\nkey_length = 32\ndecoys_per_hop = 4\nseed = 9\nrepetitions = 3\n",
        )
        .unwrap();
        let rows = sweep(&grid).unwrap();
        let scenarios = expand_grid(&grid).unwrap();
        assert_eq!(rows.len(), scenarios.len());
        for (scenario, row) in scenarios.iter().zip(rows.iter()) {
            let members = scenario
                .adversary
                .as_ref()
                .and_then(CoalitionSpec::members)
                .unwrap();
            let v: Vec<usize> = members.iter().copied().collect();
            let n = scenario.config.n_parties;
            let distance = v[1] - v[0];
            let should_succeed = liu_distance_set(n).contains(&distance);
            let expected_rate = if should_succeed { 1.0 } else { 0.0 };
            assert_eq!(
                row.coalition_success_rate,
                Some(expected_rate),
                "n={n} members={v:?}"
            );
        }
    }

    #[test]
    fn grid_limit_is_enforced() {
        let mut grid = parse_grid(
            "[grid]\nn = 3..8\nt = 1\ncoalitions = pairs\nexpected = ff\n\
             [run]\nkey_length = 8\nseed = 1\n",
        )
        .unwrap();
        grid.max_points = 10;
        assert!(matches!(sweep(&grid), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn invalid_grid_points_are_errors() {
        let grid = parse_grid(
            "[grid]\nn = 3\nt = 3\ncoalitions = none\n[run]\nkey_length = 8\n",
        )
        .unwrap();
        assert!(expand_grid(&grid).is_err());
    }

    #[test]
    fn sweeps_are_deterministic() {
        let grid = parse_grid(
            "[grid]\nn = 5\nt = 1,2\ncoalitions = pairs\nexpected = abcd\n\
             [run]\nkey_length = 16\ndecoys_per_hop = 2\nseed = 33\nrepetitions = 4\n",
        )
        .unwrap();
        let a = sweep(&grid).unwrap();
        let b = sweep(&grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kappa_column_is_exact() {
        let grid = parse_grid(
            "[grid]\nn = 4\nt = 1\ncoalitions = none\n\
             [run]\nkey_length = 32\ndecoys_per_hop = 16\nseed = 2\n",
        )
        .unwrap();
        let rows = sweep(&grid).unwrap();
        assert_eq!(rows[0].kappa, Ratio::new(1u64, 2).to_string());
        assert_eq!(rows[0].kappa_decimal, 0.5);
    }
}
