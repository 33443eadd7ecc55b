//! Collusion attacks and the schedule oracle.
//!
//! The two-stage collusion attack works in a *key stealing* stage and a
//! *key flipping* stage. Colluding participants pool their own keys and
//! home-half information from period 1 on. Whenever a member holds a travel
//! sequence owned by another member, the pair halves can be measured jointly
//! (holder measures travel, owner measures home, results exchanged over an
//! instantaneous classical side channel), revealing the XOR of every key
//! encoded on that arc so far - without touching a single decoy. Once the
//! pooled facts determine the final key, members substitute
//! `K xor K_expected xor K_final` on their remaining encoding turns, exactly
//! once per honest owner, which forces every honest participant to output
//! `K_expected`.
//!
//! Whether the flipping stage can run at all is a pure property of the
//! schedule: [`flip_feasibility`] walks the topology and reports, per honest
//! owner, whether any member still has an encoding turn at or after the
//! period in which the steal completes. The full quantum-level simulation in
//! [`LiuCollusionHooks`] must agree with this oracle; the pairing is kept as
//! two independent routes on purpose.
//!
//! Knowledge bookkeeping is exact: each learned quantity is an XOR over a
//! set of key indices, kept as a GF(2) basis of index masks, and "the
//! coalition knows the final key" means the all-indices vector lies in the
//! span. Mid-flight observations are timestamped with the period in which
//! the member held the sequence; the owners' own final measurements only
//! become available when the session finishes, after every encoding turn is
//! already spent.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::key::Key;
use crate::protocol::{
    HopInfo, SessionHooks, SessionRng, SessionState, Topology, TravelMessage,
};
use crate::qstate::{intercept_resend, Basis};

/// Maximum participant count the knowledge bookkeeping supports.
pub const MAX_ANALYZED_PARTIES: usize = 64;

/// A coalition and its strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoalitionSpec {
    /// Colluding participants running the two-stage attack with a chosen
    /// expected key.
    LiuCollusion {
        members: BTreeSet<usize>,
        expected: Key,
    },
    /// An outside eavesdropper performing intercept-resend on the given
    /// directed channels `(sender, receiver)`.
    InterceptResendEve {
        channels: BTreeSet<(usize, usize)>,
    },
}

impl CoalitionSpec {
    pub fn liu(members: impl IntoIterator<Item = usize>, expected: Key) -> Self {
        CoalitionSpec::LiuCollusion {
            members: members.into_iter().collect(),
            expected,
        }
    }

    pub fn members(&self) -> Option<&BTreeSet<usize>> {
        match self {
            CoalitionSpec::LiuCollusion { members, .. } => Some(members),
            CoalitionSpec::InterceptResendEve { .. } => None,
        }
    }

    pub fn validate(&self, n_parties: usize, key_length: usize) -> Result<()> {
        match self {
            CoalitionSpec::LiuCollusion { members, expected } => {
                if members.is_empty() {
                    return Err(Error::InvalidConfig("coalition has no members".into()));
                }
                if let Some(&m) = members.iter().find(|&&m| m >= n_parties) {
                    return Err(Error::InvalidConfig(format!(
                        "coalition member {m} out of range for N={n_parties}"
                    )));
                }
                if expected.len() != key_length {
                    return Err(Error::InvalidConfig(format!(
                        "expected key has {} bits, session uses {}",
                        expected.len(),
                        key_length
                    )));
                }
                if n_parties > MAX_ANALYZED_PARTIES {
                    return Err(Error::InvalidConfig(format!(
                        "collusion analysis supports at most {MAX_ANALYZED_PARTIES} participants"
                    )));
                }
                Ok(())
            }
            CoalitionSpec::InterceptResendEve { channels } => {
                if channels.is_empty() {
                    return Err(Error::InvalidConfig("eavesdropper taps no channels".into()));
                }
                for &(from, to) in channels {
                    if from >= n_parties || to >= n_parties || from == to {
                        return Err(Error::InvalidConfig(format!(
                            "invalid channel {from}->{to} for N={n_parties}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// The ring distances at which a two-member coalition defeats the baseline
/// single-circle protocol: `N/2` for even N, `(N-1)/2` and `(N+1)/2` for
/// odd N.
pub fn liu_distance_set(n_parties: usize) -> BTreeSet<usize> {
    assert!(n_parties >= 2);
    if n_parties.is_multiple_of(2) {
        BTreeSet::from([n_parties / 2])
    } else {
        BTreeSet::from([n_parties / 2, n_parties.div_ceil(2)])
    }
}

/// When a piece of knowledge becomes usable within a period: observations
/// land before the encode sub-phase, owners' final measurements only after
/// the session is over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Observe,
    Finalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Instant {
    period: u32,
    phase: Phase,
}

impl Instant {
    /// Can knowledge acquired at `self` drive an encoding turn in
    /// `turn_period`? The classical sync barrier sits between reception and
    /// encoding, so same-period observations qualify.
    fn usable_for_turn(self, turn_period: u32) -> bool {
        match self.phase {
            Phase::Observe => self.period <= turn_period,
            Phase::Finalize => false,
        }
    }
}

/// Incremental GF(2) basis over key-index masks, carrying the XOR value of
/// each known quantity alongside its mask.
#[derive(Debug, Clone, Default)]
struct KnowledgeBasis {
    rows: Vec<(u64, Key)>,
}

impl KnowledgeBasis {
    fn insert(&mut self, mut mask: u64, mut value: Key) {
        for (row_mask, row_value) in &self.rows {
            let lead = 1u64 << highest_bit(*row_mask);
            if mask & lead != 0 {
                mask ^= row_mask;
                if !value.is_empty() {
                    value.xor_in_place(row_value);
                }
            }
        }
        if mask != 0 {
            self.rows.push((mask, value));
            self.rows.sort_by_key(|row| std::cmp::Reverse(row.0));
        }
    }

    /// The XOR value reachable for `target`, if it lies in the span. With
    /// `value_len == 0` only membership is decided and row values are
    /// ignored.
    fn solve(&self, mut target: u64, value_len: usize) -> Option<Key> {
        let mut acc = Key::zero(value_len);
        for (row_mask, row_value) in &self.rows {
            let lead = 1u64 << highest_bit(*row_mask);
            if target & lead != 0 {
                target ^= row_mask;
                if !acc.is_empty() && !row_value.is_empty() {
                    acc.xor_in_place(row_value);
                }
            }
        }
        (target == 0).then_some(acc)
    }

    fn covers(&self, target: u64) -> bool {
        self.solve(target, 0).is_some()
    }
}

fn highest_bit(mask: u64) -> u32 {
    63 - mask.leading_zeros()
}

fn mask_of(indices: impl IntoIterator<Item = usize>) -> u64 {
    indices.into_iter().fold(0u64, |m, i| m | (1u64 << i))
}

fn all_parties_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// One XOR segment the coalition has extracted from a held sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnedSegment {
    /// XOR of the keys encoded on the arc up to the observation point.
    pub xor_value: Key,
    /// The key indices that XOR covers.
    pub indices: BTreeSet<usize>,
    /// Period in which the observing member held the sequence.
    pub period: u32,
}

/// The coalition's pooled classical knowledge.
#[derive(Debug, Clone)]
pub struct CoalitionMemory {
    /// Members' own secret keys, pooled in period 1.
    pub pooled_keys: BTreeMap<usize, Key>,
    /// Owners whose home halves the coalition can measure: exactly the
    /// members.
    pub pooled_home_info: BTreeSet<usize>,
    /// Latest observation per (owner, arc); earlier prefixes stay usable
    /// through the knowledge basis.
    pub learned_segments: BTreeMap<(usize, usize), LearnedSegment>,
    /// First period in which the pooled facts determine the final key.
    pub final_key_known_at: Option<u32>,
    basis: KnowledgeBasis,
    key_length: usize,
    n_parties: usize,
}

impl CoalitionMemory {
    fn new(n_parties: usize, key_length: usize) -> Self {
        CoalitionMemory {
            pooled_keys: BTreeMap::new(),
            pooled_home_info: BTreeSet::new(),
            learned_segments: BTreeMap::new(),
            final_key_known_at: None,
            basis: KnowledgeBasis::default(),
            key_length,
            n_parties,
        }
    }

    fn pool_key(&mut self, member: usize, key: Key) {
        self.basis.insert(mask_of([member]), key.clone());
        self.pooled_keys.insert(member, key);
        self.pooled_home_info.insert(member);
    }

    fn record_segment(
        &mut self,
        owner: usize,
        arc: usize,
        segment: LearnedSegment,
    ) {
        self.basis.insert(
            mask_of(segment.indices.iter().copied()),
            segment.xor_value.clone(),
        );
        self.learned_segments.insert((owner, arc), segment);
    }

    fn refresh_known_at(&mut self, period: u32) {
        if self.final_key_known_at.is_none()
            && self.basis.covers(all_parties_mask(self.n_parties))
        {
            self.final_key_known_at = Some(period);
        }
    }

    /// The final key, if the pooled facts already determine it.
    pub fn final_key(&self) -> Option<Key> {
        self.basis
            .solve(all_parties_mask(self.n_parties), self.key_length)
    }
}

/// Record what a member holding another member's sequence learns: the
/// member Z-measures the travel halves, the owner the matching home halves,
/// and the XOR (shared instantly inside the coalition) is the XOR of every
/// key encoded on this arc so far. The collapsed travel qubits are forwarded
/// unchanged, so later honest encodings still accumulate correctly and no
/// decoy is ever disturbed.
pub fn coalition_observe(
    memory: &mut CoalitionMemory,
    member: usize,
    hop: HopInfo,
    msg: &mut TravelMessage,
    topology: &Topology,
    rng: &mut SessionRng,
) -> Result<()> {
    if !memory.pooled_home_info.contains(&msg.owner) {
        return Err(Error::Strategy(format!(
            "coalition has no home-half access for owner {}",
            msg.owner
        )));
    }
    debug_assert_eq!(hop.holder, member);
    let position = topology
        .position_on_arc(msg.owner, msg.arc, member)
        .ok_or_else(|| {
            Error::Strategy(format!(
                "member {member} does not hold (owner {}, arc {})",
                msg.owner, msg.arc
            ))
        })?;
    let indices: BTreeSet<usize> = topology.encoders(msg.owner, msg.arc)[..position]
        .iter()
        .copied()
        .collect();

    let mut xor_value = Key::zero(memory.key_length);
    for (bit_index, pair) in msg.pair_states_mut().enumerate() {
        let (r, s) = pair.measure_z(rng);
        xor_value.set_bit(bit_index, r ^ s);
    }

    memory.record_segment(
        msg.owner,
        msg.arc,
        LearnedSegment {
            xor_value,
            indices,
            period: hop.period,
        },
    );
    memory.refresh_known_at(hop.period);
    Ok(())
}

/// Feasibility of the flipping stage, derived from the schedule alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    /// First period in which the coalition knows the final key; the final
    /// period if only the owners' own measurements reveal it.
    pub known_at: Option<u32>,
    /// Per honest owner: does any member have an encoding turn on one of
    /// the owner's arcs no earlier than the steal completes?
    pub per_owner: BTreeMap<usize, bool>,
    /// True when every honest owner can be flipped.
    pub overall: bool,
}

fn liu_members(coalition: &CoalitionSpec) -> Result<&BTreeSet<usize>> {
    coalition.members().ok_or_else(|| {
        Error::Strategy("schedule analysis requires the collusion strategy".into())
    })
}

/// Walk the schedule and return the earliest instant at which the pooled
/// keys plus observed segments determine the final key.
fn known_final_key_instant(topology: &Topology, members: &BTreeSet<usize>) -> Option<Instant> {
    let n = topology.n_parties();
    if members.is_empty() || n > MAX_ANALYZED_PARTIES {
        return None;
    }
    // (instant, mask) knowledge events in schedule order.
    let mut events: Vec<(Instant, u64)> = Vec::new();
    let start = Instant {
        period: 1,
        phase: Phase::Observe,
    };
    for &m in members {
        events.push((start, mask_of([m])));
    }
    let completion = Instant {
        period: topology.completion_period(),
        phase: Phase::Finalize,
    };
    for &owner in members {
        for arc in 0..topology.arcs_per_owner() {
            let encoders = topology.encoders(owner, arc);
            for (pos, holder) in encoders.iter().enumerate() {
                if members.contains(holder) {
                    let instant = Instant {
                        period: pos as u32 + 2,
                        phase: Phase::Observe,
                    };
                    events.push((instant, mask_of(encoders[..pos].iter().copied())));
                }
            }
            events.push((completion, mask_of(encoders.iter().copied())));
        }
    }
    events.sort_by_key(|(instant, _)| *instant);

    let target = all_parties_mask(n);
    let mut basis = KnowledgeBasis::default();
    let mut i = 0;
    while i < events.len() {
        let instant = events[i].0;
        while i < events.len() && events[i].0 == instant {
            basis.insert(events[i].1, Key::zero(0));
            i += 1;
        }
        if basis.covers(target) {
            return Some(instant);
        }
    }
    None
}

/// First period in which the coalition can know the final key, or `None`
/// for an empty coalition.
pub fn known_final_key_period(
    topology: &Topology,
    coalition: &CoalitionSpec,
) -> Result<Option<u32>> {
    let members = liu_members(coalition)?;
    Ok(known_final_key_instant(topology, members).map(|i| i.period))
}

/// A planned key substitution: which member flips which arc of an honest
/// owner, and when.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FlipTurn {
    member: usize,
    arc: usize,
    period: u32,
}

/// For each honest owner, the designated flip turn at or after `known`:
/// earliest eligible period, ties broken by lowest member index then lowest
/// arc. `None` if some honest owner has no eligible turn.
fn flip_plan(
    topology: &Topology,
    members: &BTreeSet<usize>,
    known: Instant,
) -> Option<BTreeMap<usize, FlipTurn>> {
    let mut plan = BTreeMap::new();
    for owner in 0..topology.n_parties() {
        if members.contains(&owner) {
            continue;
        }
        let mut best: Option<FlipTurn> = None;
        for arc in 0..topology.arcs_per_owner() {
            for (pos, holder) in topology.encoders(owner, arc).iter().enumerate() {
                if !members.contains(holder) {
                    continue;
                }
                let period = pos as u32 + 2;
                if !known.usable_for_turn(period) {
                    continue;
                }
                let candidate = FlipTurn {
                    member: *holder,
                    arc,
                    period,
                };
                let better = match best {
                    None => true,
                    Some(b) => {
                        (candidate.period, candidate.member, candidate.arc)
                            < (b.period, b.member, b.arc)
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        plan.insert(owner, best?);
    }
    Some(plan)
}

/// The executable form of the security argument: the steal always succeeds
/// eventually, but flipping requires a member encoding turn at or after the
/// steal completes, for every honest owner.
pub fn flip_feasibility(
    topology: &Topology,
    coalition: &CoalitionSpec,
) -> Result<FeasibilityReport> {
    let members = liu_members(coalition)?;
    let known = known_final_key_instant(topology, members);
    let mut per_owner = BTreeMap::new();
    for owner in 0..topology.n_parties() {
        if members.contains(&owner) {
            continue;
        }
        let possible = known.is_some_and(|known| {
            (0..topology.arcs_per_owner()).any(|arc| {
                topology
                    .encoders(owner, arc)
                    .iter()
                    .enumerate()
                    .any(|(pos, holder)| {
                        members.contains(holder) && known.usable_for_turn(pos as u32 + 2)
                    })
            })
        });
        per_owner.insert(owner, possible);
    }
    let overall = known.is_some() && per_owner.values().all(|&b| b);
    Ok(FeasibilityReport {
        known_at: known.map(|i| i.period),
        per_owner,
        overall,
    })
}

/// Session hooks implementing the full two-stage attack at the quantum
/// level.
pub struct LiuCollusionHooks {
    members: BTreeSet<usize>,
    expected: Key,
    topology: Topology,
    memory: CoalitionMemory,
    plan: Option<BTreeMap<usize, FlipTurn>>,
    plan_decided: bool,
    delta: Option<Key>,
}

impl LiuCollusionHooks {
    pub fn new(
        members: BTreeSet<usize>,
        expected: Key,
        topology: Topology,
        key_length: usize,
    ) -> Self {
        let n = topology.n_parties();
        LiuCollusionHooks {
            members,
            expected,
            topology,
            memory: CoalitionMemory::new(n, key_length),
            plan: None,
            plan_decided: false,
            delta: None,
        }
    }

    pub fn memory(&self) -> &CoalitionMemory {
        &self.memory
    }

    fn decide_plan(&mut self, known_period: u32) {
        self.plan_decided = true;
        let final_key = self
            .memory
            .final_key()
            .expect("plan decided only once the final key is known");
        self.delta = Some(&self.expected ^ &final_key);
        let known = Instant {
            period: known_period,
            phase: Phase::Observe,
        };
        // All-or-nothing: a partial flip would desynchronize the honest
        // parties without forcing the expected key, so the coalition only
        // commits when every honest owner is reachable.
        self.plan = flip_plan(&self.topology, &self.members, known);
    }
}

impl SessionHooks for LiuCollusionHooks {
    fn on_start(&mut self, session: &SessionState) {
        for &m in &self.members {
            let key = session.participants[m].secret_key.clone();
            self.memory.pool_key(m, key);
        }
        self.memory.refresh_known_at(1);
    }

    fn after_detect(&mut self, hop: HopInfo, msg: &mut TravelMessage, rng: &mut SessionRng) {
        if self.members.contains(&hop.holder) && self.members.contains(&msg.owner) {
            coalition_observe(&mut self.memory, hop.holder, hop, msg, &self.topology, rng)
                .expect("members only observe pooled sequences");
        }
    }

    fn on_sync(&mut self, _period: u32) {
        if !self.plan_decided {
            if let Some(known_period) = self.memory.final_key_known_at {
                self.decide_plan(known_period);
            }
        }
    }

    fn key_for_turn(&mut self, hop: HopInfo, true_key: &Key) -> Key {
        if let (Some(plan), Some(delta)) = (&self.plan, &self.delta) {
            if let Some(turn) = plan.get(&hop.owner) {
                if turn.member == hop.holder && turn.arc == hop.arc && turn.period == hop.period {
                    return true_key ^ delta;
                }
            }
        }
        true_key.clone()
    }

    fn reported_key(&mut self, participant: usize, computed: &Key) -> Key {
        if self.members.contains(&participant) {
            self.expected.clone()
        } else {
            computed.clone()
        }
    }

    fn known_final_key_at(&self) -> Option<u32> {
        self.memory.final_key_known_at
    }
}

/// Intercept-resend eavesdropping on selected channels: every payload slot
/// is measured in a random basis guess and the collapsed state forwarded.
pub struct InterceptResendEveHooks {
    channels: BTreeSet<(usize, usize)>,
    pub intercepted_qubits: usize,
}

impl InterceptResendEveHooks {
    pub fn new(channels: BTreeSet<(usize, usize)>) -> Self {
        InterceptResendEveHooks {
            channels,
            intercepted_qubits: 0,
        }
    }
}

impl SessionHooks for InterceptResendEveHooks {
    fn on_transit(&mut self, msg: &mut TravelMessage, rng: &mut SessionRng) {
        if !self.channels.contains(&(msg.sender, msg.receiver)) {
            return;
        }
        for slot in &mut msg.payload {
            let guess = Basis::random(rng);
            match slot {
                crate::protocol::PayloadSlot::Pair(pair) => {
                    pair.measure_travel(guess, rng);
                }
                crate::protocol::PayloadSlot::Decoy(q) => {
                    let (_, resent) = intercept_resend(q, guess, rng);
                    *q = resent;
                }
            }
            self.intercepted_qubits += 1;
        }
    }
}

/// Build the behavior hooks for a coalition (or honest hooks for `None`).
pub fn execute_strategy(
    coalition: Option<&CoalitionSpec>,
    topology: &Topology,
    key_length: usize,
) -> Result<Box<dyn SessionHooks>> {
    match coalition {
        None => Ok(Box::new(crate::protocol::HonestHooks)),
        Some(spec) => {
            spec.validate(topology.n_parties(), key_length)?;
            match spec {
                CoalitionSpec::LiuCollusion { members, expected } => {
                    Ok(Box::new(LiuCollusionHooks::new(
                        members.clone(),
                        expected.clone(),
                        topology.clone(),
                        key_length,
                    )))
                }
                CoalitionSpec::InterceptResendEve { channels } => Ok(Box::new(
                    InterceptResendEveHooks::new(channels.clone()),
                )),
            }
        }
    }
}

/// Enumerate every nonempty coalition of size at most `max_size`.
pub fn enumerate_coalitions(n_parties: usize, max_size: usize) -> Vec<BTreeSet<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn recurse(
        start: usize,
        n: usize,
        max: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<BTreeSet<usize>>,
    ) {
        if !current.is_empty() {
            out.push(current.iter().copied().collect());
        }
        if current.len() == max {
            return;
        }
        for next in start..n {
            current.push(next);
            recurse(next + 1, n, max, current, out);
            current.pop();
        }
    }
    recurse(0, n_parties, max_size, &mut current, &mut out);
    out
}
