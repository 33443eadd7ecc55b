//! Scenario and grid files.
//!
//! Both are flat key/value documents with `[section]` headers, `#` comments
//! and `key = value` lines. Unknown sections or keys are hard errors:
//! a typo must never silently change a security experiment.
//!
//! Scenario file:
//!
//! ```text
//! [protocol]
//! n = 6
//! t = 1
//! key_length = 32
//! decoys_per_hop = 8
//! error_threshold = 0        # optional, default 0
//!
//! [adversary]                # optional section; omit for an honest run
//! strategy = liu_collusion   # or intercept_resend_eve
//! members = 0,3              # liu_collusion only
//! expected = a5a5a5a5        # hex, liu_collusion only
//! channels = 0>1,1>2         # intercept_resend_eve only
//!
//! [run]
//! seed = 42
//! repetitions = 100
//! label = baseline-attack
//! assert_honest_agreement = 1.0    # optional CI gates
//! assert_coalition_success = 1.0
//! assert_detection_free = true
//! ```
//!
//! Grid file (for sweeps): `[grid]` takes `n` and `t` as single values,
//! comma lists or inclusive ranges `lo..hi`; `coalitions` is `none`,
//! `pairs` (every two-member placement) or an explicit member list.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::key::Key;
use crate::protocol::ProtocolConfig;
use crate::adversary::CoalitionSpec;

/// Optional CI gates checked after a scenario run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assertions {
    pub honest_agreement: Option<f64>,
    pub coalition_success: Option<f64>,
    pub detection_free: Option<bool>,
}

impl Assertions {
    pub fn is_empty(&self) -> bool {
        self.honest_agreement.is_none()
            && self.coalition_success.is_none()
            && self.detection_free.is_none()
    }
}

/// One experiment: a protocol configuration, an optional adversary, and a
/// repetition count. `config.seed` acts as the master seed from which
/// per-repetition seeds and keys are derived.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub config: ProtocolConfig,
    pub adversary: Option<CoalitionSpec>,
    pub repetitions: usize,
    pub assertions: Assertions,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.repetitions < 1 {
            return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
        }
        if let Some(adversary) = &self.adversary {
            adversary.validate(self.config.n_parties, self.config.key_length)?;
        }
        Ok(())
    }
}

/// Coalition placements swept over by a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlacementAxis {
    /// Honest runs only.
    None,
    /// Every two-member placement.
    AllPairs,
    /// A single explicit placement.
    Explicit(BTreeSet<usize>),
}

/// A sweep grid: the cartesian product of `n`, `t` and coalition
/// placements.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub label: String,
    pub n_values: Vec<usize>,
    pub t_values: Vec<usize>,
    pub placements: PlacementAxis,
    pub expected: Option<Key>,
    pub key_length: usize,
    pub decoys_per_hop: usize,
    pub error_threshold: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub max_points: usize,
}

struct RawItem {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<RawItem>> {
    let mut section = String::new();
    let mut items = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line
            .split_once('#')
            .map_or(raw_line, |(head, _)| head)
            .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Scenario(format!("line {}: malformed section", idx + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Scenario(format!("line {}: expected `key = value`", idx + 1))
        })?;
        if section.is_empty() {
            return Err(Error::Scenario(format!(
                "line {}: key outside any [section]",
                idx + 1
            )));
        }
        items.push(RawItem {
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line: idx + 1,
        });
    }
    Ok(items)
}

fn parse_usize(item: &RawItem) -> Result<usize> {
    item.value.parse().map_err(|_| {
        Error::Scenario(format!(
            "line {}: `{}` is not a valid count for {}",
            item.line, item.value, item.key
        ))
    })
}

fn parse_u64(item: &RawItem) -> Result<u64> {
    item.value.parse().map_err(|_| {
        Error::Scenario(format!(
            "line {}: `{}` is not a valid integer for {}",
            item.line, item.value, item.key
        ))
    })
}

fn parse_f64(item: &RawItem) -> Result<f64> {
    item.value.parse().map_err(|_| {
        Error::Scenario(format!(
            "line {}: `{}` is not a valid number for {}",
            item.line, item.value, item.key
        ))
    })
}

fn parse_bool(item: &RawItem) -> Result<bool> {
    match item.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Scenario(format!(
            "line {}: `{}` is not a boolean for {}",
            item.line, item.value, item.key
        ))),
    }
}

fn parse_member_list(item: &RawItem) -> Result<BTreeSet<usize>> {
    item.value
        .split(',')
        .map(|part| {
            part.trim().parse::<usize>().map_err(|_| {
                Error::Scenario(format!(
                    "line {}: `{}` is not a participant index",
                    item.line, part
                ))
            })
        })
        .collect()
}

fn parse_channels(item: &RawItem) -> Result<BTreeSet<(usize, usize)>> {
    item.value
        .split(',')
        .map(|part| {
            let (from, to) = part.trim().split_once('>').ok_or_else(|| {
                Error::Scenario(format!(
                    "line {}: channel `{}` must look like `0>1`",
                    item.line, part
                ))
            })?;
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| {
                    Error::Scenario(format!(
                        "line {}: `{}` is not a participant index",
                        item.line, s
                    ))
                })
            };
            Ok((parse(from)?, parse(to)?))
        })
        .collect()
}

/// `5`, `4,6,8` or inclusive `3..8`.
fn parse_count_axis(item: &RawItem) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = item.value.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| {
            Error::Scenario(format!("line {}: bad range start `{}`", item.line, lo))
        })?;
        let hi: usize = hi.trim().parse().map_err(|_| {
            Error::Scenario(format!("line {}: bad range end `{}`", item.line, hi))
        })?;
        if lo > hi {
            return Err(Error::Scenario(format!(
                "line {}: empty range {lo}..{hi}",
                item.line
            )));
        }
        Ok((lo..=hi).collect())
    } else {
        item.value
            .split(',')
            .map(|part| {
                part.trim().parse::<usize>().map_err(|_| {
                    Error::Scenario(format!("line {}: bad count `{}`", item.line, part))
                })
            })
            .collect()
    }
}

/// Parse a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let items = tokenize(text)?;

    let mut n = None;
    let mut t = None;
    let mut key_length = None;
    let mut decoys_per_hop = 0usize;
    let mut error_threshold = 0.0f64;
    let mut strategy: Option<String> = None;
    let mut members: Option<BTreeSet<usize>> = None;
    let mut expected: Option<Key> = None;
    let mut channels: Option<BTreeSet<(usize, usize)>> = None;
    let mut seed = 0u64;
    let mut repetitions = 1usize;
    let mut label = "scenario".to_string();
    let mut assertions = Assertions::default();
    let mut saw_adversary_section = false;

    for item in &items {
        match (item.section.as_str(), item.key.as_str()) {
            ("protocol", "n") => n = Some(parse_usize(item)?),
            ("protocol", "t") => t = Some(parse_usize(item)?),
            ("protocol", "key_length") => key_length = Some(parse_usize(item)?),
            ("protocol", "decoys_per_hop") => decoys_per_hop = parse_usize(item)?,
            ("protocol", "error_threshold") => error_threshold = parse_f64(item)?,
            ("adversary", "strategy") => {
                saw_adversary_section = true;
                strategy = Some(item.value.clone());
            }
            ("adversary", "members") => members = Some(parse_member_list(item)?),
            ("adversary", "expected") => expected = Some(Key::from_hex(&item.value)?),
            ("adversary", "channels") => channels = Some(parse_channels(item)?),
            ("run", "seed") => seed = parse_u64(item)?,
            ("run", "repetitions") => repetitions = parse_usize(item)?,
            ("run", "label") => label = item.value.clone(),
            ("run", "assert_honest_agreement") => {
                assertions.honest_agreement = Some(parse_f64(item)?)
            }
            ("run", "assert_coalition_success") => {
                assertions.coalition_success = Some(parse_f64(item)?)
            }
            ("run", "assert_detection_free") => {
                assertions.detection_free = Some(parse_bool(item)?)
            }
            (section, key) => {
                return Err(Error::Scenario(format!(
                    "line {}: unknown key `{key}` in section [{section}]",
                    item.line
                )));
            }
        }
    }

    let n = n.ok_or_else(|| Error::Scenario("missing [protocol] n".into()))?;
    let t = t.ok_or_else(|| Error::Scenario("missing [protocol] t".into()))?;
    let key_length =
        key_length.ok_or_else(|| Error::Scenario("missing [protocol] key_length".into()))?;

    let adversary = match strategy.as_deref() {
        None if !saw_adversary_section => None,
        None | Some("honest") => None,
        Some("liu_collusion") => {
            let members =
                members.ok_or_else(|| Error::Scenario("liu_collusion requires members".into()))?;
            let expected = expected
                .ok_or_else(|| Error::Scenario("liu_collusion requires expected (hex)".into()))?;
            Some(CoalitionSpec::LiuCollusion { members, expected })
        }
        Some("intercept_resend_eve") => {
            let channels = channels.ok_or_else(|| {
                Error::Scenario("intercept_resend_eve requires channels".into())
            })?;
            Some(CoalitionSpec::InterceptResendEve { channels })
        }
        Some(other) => {
            return Err(Error::Scenario(format!("unknown strategy `{other}`")));
        }
    };

    let scenario = Scenario {
        label,
        config: ProtocolConfig {
            n_parties: n,
            resistance: t,
            key_length,
            decoys_per_hop,
            seed,
            error_threshold,
        },
        adversary,
        repetitions,
        assertions,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Parse a grid document.
pub fn parse_grid(text: &str) -> Result<SweepGrid> {
    let items = tokenize(text)?;

    let mut n_values = None;
    let mut t_values = None;
    let mut placements = PlacementAxis::None;
    let mut expected = None;
    let mut key_length = None;
    let mut decoys_per_hop = 0usize;
    let mut error_threshold = 0.0f64;
    let mut seed = 0u64;
    let mut repetitions = 1usize;
    let mut label = "sweep".to_string();
    let mut max_points = 10_000usize;

    for item in &items {
        match (item.section.as_str(), item.key.as_str()) {
            ("grid", "n") => n_values = Some(parse_count_axis(item)?),
            ("grid", "t") => t_values = Some(parse_count_axis(item)?),
            ("grid", "coalitions") => {
                placements = match item.value.as_str() {
                    "none" => PlacementAxis::None,
                    "pairs" => PlacementAxis::AllPairs,
                    _ => PlacementAxis::Explicit(parse_member_list(item)?),
                }
            }
            ("grid", "expected") => expected = Some(Key::from_hex(&item.value)?),
            ("grid", "max_points") => max_points = parse_usize(item)?,
            ("run", "key_length") => key_length = Some(parse_usize(item)?),
            ("run", "decoys_per_hop") => decoys_per_hop = parse_usize(item)?,
            ("run", "error_threshold") => error_threshold = parse_f64(item)?,
            ("run", "seed") => seed = parse_u64(item)?,
            ("run", "repetitions") => repetitions = parse_usize(item)?,
            ("run", "label") => label = item.value.clone(),
            (section, key) => {
                return Err(Error::Scenario(format!(
                    "line {}: unknown key `{key}` in section [{section}]",
                    item.line
                )));
            }
        }
    }

    let n_values = n_values.ok_or_else(|| Error::Scenario("missing [grid] n".into()))?;
    let t_values = t_values.ok_or_else(|| Error::Scenario("missing [grid] t".into()))?;
    let key_length =
        key_length.ok_or_else(|| Error::Scenario("missing [run] key_length".into()))?;
    if placements != PlacementAxis::None && expected.is_none() {
        return Err(Error::Scenario(
            "coalition sweeps require [grid] expected (hex)".into(),
        ));
    }

    Ok(SweepGrid {
        label,
        n_values,
        t_values,
        placements,
        expected,
        key_length,
        decoys_per_hop,
        error_threshold,
        seed,
        repetitions,
        max_points,
    })
}
