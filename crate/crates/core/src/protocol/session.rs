//! The lock-step session engine.
//!
//! A session starts with every owner preparing `t` arcs of fresh entangled
//! pairs and sending each arc's travel halves to its first encoder (period
//! 1). Each later period processes every in-flight sequence in four
//! sub-phases, in this order:
//!
//! 1. **receive/detect** - the holder takes delivery, the previous holder
//!    announces its decoy records, and the holder measures the announced
//!    decoys. Too many mismatches abort the whole session.
//! 2. **sync** - a barrier between reception and encoding; adversarial
//!    strategies exchange classical information here.
//! 3. **encode/send** - the holder applies `X^bit` per key bit, interleaves
//!    fresh decoys and forwards the sequence.
//! 4. **return** - a sequence forwarded to its owner is verified by the
//!    owner within the same period, closing the sub-circle.
//!
//! When every arc is back home the session is complete; owners measure all
//! pairs and XOR the per-arc results with their own key to obtain the final
//! key. The whole run is deterministic given the configuration seed: all
//! randomness (decoy placement, decoy states, Born-rule outcomes) flows from
//! one counter-based stream, and messages are processed in sorted
//! `(owner, arc)` order.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::key::Key;
use crate::qstate::{prepare_decoy, prepare_pair, Basis, DecoyRecord, PairState, PauliOp, QubitState};

use super::topology::{build_topology, Topology};

/// The random stream every session draws from.
pub type SessionRng = ChaCha12Rng;

/// Static parameters of one protocol session.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Number of participants N.
    pub n_parties: usize,
    /// Number of sub-circles t each owner splits its sequence into; the
    /// protocol is designed to resist coalitions up to this size.
    pub resistance: usize,
    /// Key bits per participant.
    pub key_length: usize,
    /// Decoy qubits inserted before each send.
    pub decoys_per_hop: usize,
    /// Seed for the session's random stream.
    pub seed: u64,
    /// Tolerated fraction of decoy mismatches per hop; 0 means any mismatch
    /// aborts.
    pub error_threshold: f64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_parties < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 participants, got {}",
                self.n_parties
            )));
        }
        if self.resistance < 1 || self.resistance >= self.n_parties {
            return Err(Error::InvalidConfig(format!(
                "resistance must satisfy 1 <= t < N, got t={}, N={}",
                self.resistance, self.n_parties
            )));
        }
        if self.key_length < 1 {
            return Err(Error::InvalidConfig("key_length must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.error_threshold) {
            return Err(Error::InvalidConfig(format!(
                "error_threshold must lie in [0, 1), got {}",
                self.error_threshold
            )));
        }
        Ok(())
    }

    /// Detection rate kappa = decoys per key qubit.
    pub fn detection_rate(&self) -> Ratio<u64> {
        Ratio::new(self.decoys_per_hop as u64, self.key_length as u64)
    }
}

/// One slot of an in-flight payload: a travel half of an entangled pair, or
/// an interleaved decoy qubit.
#[derive(Debug, Clone, PartialEq)]
pub enum PayloadSlot {
    Pair(PairState),
    Decoy(QubitState),
}

/// A travel sequence in flight. The joint pair amplitudes ride with the
/// message; physically the home halves stay with the owner, but nothing in
/// the protocol touches them until the arc returns, so the simulation keeps
/// each pair as a single object.
#[derive(Debug, Clone)]
pub struct TravelMessage {
    pub owner: usize,
    pub arc: usize,
    pub sender: usize,
    pub receiver: usize,
    /// Period in which the message was (last) sent.
    pub period: u32,
    pub payload: Vec<PayloadSlot>,
    /// The sender's decoy bookkeeping, announced at detection time.
    pub decoy_records: Vec<DecoyRecord>,
}

impl TravelMessage {
    pub fn pair_count(&self) -> usize {
        self.payload
            .iter()
            .filter(|s| matches!(s, PayloadSlot::Pair(_)))
            .count()
    }

    pub fn decoy_count(&self) -> usize {
        self.payload.len() - self.pair_count()
    }

    /// Mutable access to the pair slots, in payload order.
    pub fn pair_states_mut(&mut self) -> impl Iterator<Item = &mut PairState> {
        self.payload.iter_mut().filter_map(|slot| match slot {
            PayloadSlot::Pair(p) => Some(p),
            PayloadSlot::Decoy(_) => None,
        })
    }

    fn into_pairs(self) -> Vec<PairState> {
        self.payload
            .into_iter()
            .filter_map(|slot| match slot {
                PayloadSlot::Pair(p) => Some(p),
                PayloadSlot::Decoy(_) => None,
            })
            .collect()
    }
}

/// Identifies one hop of one arc: who currently holds it and in which
/// period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopInfo {
    pub owner: usize,
    pub arc: usize,
    pub holder: usize,
    pub period: u32,
}

/// Behavior hooks threaded through a session run. The default
/// implementations are honest no-ops; adversarial strategies override the
/// methods they need. Hook order within a period follows the engine's
/// sub-phases: `on_transit` (wire), `after_detect` (holding), `on_sync`
/// (classical side channel), `key_for_turn` (encoding), and `reported_key`
/// (finalization).
pub trait SessionHooks {
    /// Called once after initialization, before the first period runs.
    fn on_start(&mut self, _session: &SessionState) {}

    /// Wire tap: runs on every message between send and reception.
    fn on_transit(&mut self, _msg: &mut TravelMessage, _rng: &mut SessionRng) {}

    /// Runs after the holder's detection passed and decoys were stripped.
    fn after_detect(&mut self, _hop: HopInfo, _msg: &mut TravelMessage, _rng: &mut SessionRng) {}

    /// Classical sync barrier between the receive and encode sub-phases.
    fn on_sync(&mut self, _period: u32) {}

    /// The key bits the holder encodes on this turn.
    fn key_for_turn(&mut self, _hop: HopInfo, true_key: &Key) -> Key {
        true_key.clone()
    }

    /// The final key a participant reports after measuring.
    fn reported_key(&mut self, _participant: usize, computed: &Key) -> Key {
        computed.clone()
    }

    /// For attack strategies: the period in which the strategy learned the
    /// final key mid-flight, if it did.
    fn known_final_key_at(&self) -> Option<u32> {
        None
    }
}

/// Honest behavior for every participant.
#[derive(Debug, Default)]
pub struct HonestHooks;

impl SessionHooks for HonestHooks {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartyStatus {
    Running,
    Accepted,
    Aborted,
}

#[derive(Debug)]
pub struct ParticipantState {
    pub index: usize,
    pub secret_key: Key,
    /// Per arc: the pair sequence once it has returned and passed the final
    /// detection.
    pub returned_arcs: Vec<Option<Vec<PairState>>>,
    pub status: PartyStatus,
    pub final_key: Option<Key>,
}

/// Everything observable about a run, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Send {
        owner: usize,
        arc: usize,
        sender: usize,
        receiver: usize,
        period: u32,
    },
    Announce {
        owner: usize,
        arc: usize,
        announcer: usize,
        period: u32,
        decoys: usize,
    },
    Detect {
        owner: usize,
        arc: usize,
        detector: usize,
        period: u32,
        passed: bool,
        mismatches: usize,
    },
    Encode {
        owner: usize,
        arc: usize,
        encoder: usize,
        period: u32,
    },
    FinalMeasure {
        owner: usize,
        period: u32,
    },
    Abort {
        period: u32,
        detectors: Vec<usize>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn detection_failures(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Detect { passed: false, .. }))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    Running,
    Complete,
    Aborted,
}

/// The lock-step protocol world.
#[derive(Debug)]
pub struct SessionState {
    pub config: ProtocolConfig,
    pub topology: Topology,
    pub participants: Vec<ParticipantState>,
    /// Live travel messages keyed by (owner, arc); sorted iteration keeps
    /// the run deterministic.
    pub in_flight: BTreeMap<(usize, usize), TravelMessage>,
    /// Current period; preparation and first sends are period 1.
    pub period: u32,
    pub status: SessionStatus,
    pub transcript: Transcript,
    rng: SessionRng,
}

/// Outcome of detecting one hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionOutcome {
    Pass { mismatches: usize },
    Fail { mismatches: usize },
}

impl DetectionOutcome {
    pub fn passed(self) -> bool {
        matches!(self, DetectionOutcome::Pass { .. })
    }

    pub fn mismatches(self) -> usize {
        match self {
            DetectionOutcome::Pass { mismatches } | DetectionOutcome::Fail { mismatches } => {
                mismatches
            }
        }
    }
}

/// Interleave `decoys` fresh random decoy qubits with the given pairs.
/// Positions, bases and bits are drawn from `rng`.
fn insert_decoys<R: Rng + ?Sized>(
    pairs: Vec<PairState>,
    decoys: usize,
    rng: &mut R,
) -> (Vec<PayloadSlot>, Vec<DecoyRecord>) {
    let total = pairs.len() + decoys;
    let mut positions = if decoys > 0 {
        sample(rng, total, decoys).into_vec()
    } else {
        Vec::new()
    };
    positions.sort_unstable();

    let mut slots = Vec::with_capacity(total);
    let mut records = Vec::with_capacity(decoys);
    let mut pair_iter = pairs.into_iter();
    let mut next_decoy = positions.iter().copied().peekable();
    for position in 0..total {
        if next_decoy.peek() == Some(&position) {
            next_decoy.next();
            let basis = Basis::random(rng);
            let bit = rng.random_bool(0.5);
            slots.push(PayloadSlot::Decoy(prepare_decoy(basis, bit)));
            records.push(DecoyRecord {
                position,
                basis,
                bit,
            });
        } else {
            slots.push(PayloadSlot::Pair(pair_iter.next().expect("pair count")));
        }
    }
    (slots, records)
}

/// Receiver-side detection of one hop: measure every announced decoy in its
/// announced basis, compare with the announced bit, and strip the decoys
/// from the payload. Passes when the mismatch fraction is within
/// `error_threshold`.
///
/// An announcement referencing a non-decoy position, a position out of
/// range, a duplicate position, or fewer positions than there are decoys is
/// a protocol violation.
pub fn detect_hop<R: Rng + ?Sized>(
    msg: &mut TravelMessage,
    announcement: &[DecoyRecord],
    error_threshold: f64,
    rng: &mut R,
) -> Result<DetectionOutcome> {
    let mut seen = vec![false; msg.payload.len()];
    let mut mismatches = 0usize;
    for record in announcement {
        let slot = msg.payload.get_mut(record.position).ok_or_else(|| {
            Error::ProtocolViolation(format!(
                "announced decoy position {} out of range",
                record.position
            ))
        })?;
        if seen[record.position] {
            return Err(Error::ProtocolViolation(format!(
                "duplicate decoy position {} in announcement",
                record.position
            )));
        }
        seen[record.position] = true;
        match slot {
            PayloadSlot::Decoy(q) => {
                if q.measure(record.basis, rng) != record.bit {
                    mismatches += 1;
                }
            }
            PayloadSlot::Pair(_) => {
                return Err(Error::ProtocolViolation(format!(
                    "announced position {} is not a decoy",
                    record.position
                )));
            }
        }
    }
    let unannounced = msg
        .payload
        .iter()
        .zip(seen.iter())
        .any(|(slot, &announced)| matches!(slot, PayloadSlot::Decoy(_)) && !announced);
    if unannounced {
        return Err(Error::ProtocolViolation(
            "payload contains unannounced decoy slots".into(),
        ));
    }

    let mut keep = seen.iter().map(|&announced| !announced);
    msg.payload.retain(|_| keep.next().unwrap());
    msg.decoy_records.clear();

    let checked = announcement.len();
    let fraction = if checked == 0 {
        0.0
    } else {
        mismatches as f64 / checked as f64
    };
    if fraction <= error_threshold {
        Ok(DetectionOutcome::Pass { mismatches })
    } else {
        Ok(DetectionOutcome::Fail { mismatches })
    }
}

/// Encoding turn: the scheduled holder applies `X^bit` per key bit to the
/// travel halves, interleaves fresh decoys and addresses the message to the
/// next hop. Rejects encoders that are not scheduled for this (owner, arc,
/// period).
pub fn encode_hop<R: Rng + ?Sized>(
    encoder: usize,
    key: &Key,
    msg: &mut TravelMessage,
    topology: &Topology,
    decoys_per_hop: usize,
    rng: &mut R,
) -> Result<()> {
    let acting_period = msg.period + 1;
    let scheduled = topology.encoder_at(msg.owner, msg.arc, acting_period);
    if scheduled != Some(encoder) {
        return Err(Error::ScheduleViolation(format!(
            "participant {encoder} is not scheduled to encode (owner {}, arc {}) in period {acting_period}",
            msg.owner, msg.arc
        )));
    }
    if msg.decoy_count() != 0 {
        return Err(Error::ProtocolViolation(
            "encoding attempted before decoys were stripped".into(),
        ));
    }
    if msg.pair_count() != key.len() {
        return Err(Error::ProtocolViolation(format!(
            "payload carries {} pairs but the key has {} bits",
            msg.pair_count(),
            key.len()
        )));
    }

    for (pair, bit) in msg.pair_states_mut().zip(key.bits()) {
        pair.apply_travel_pauli(PauliOp::for_bit(*bit));
    }

    let pairs: Vec<PairState> = std::mem::take(&mut msg.payload)
        .into_iter()
        .map(|slot| match slot {
            PayloadSlot::Pair(p) => p,
            PayloadSlot::Decoy(_) => unreachable!("decoys already stripped"),
        })
        .collect();
    let (payload, records) = insert_decoys(pairs, decoys_per_hop, rng);
    msg.payload = payload;
    msg.decoy_records = records;
    msg.sender = encoder;
    msg.receiver = topology
        .next_receiver(msg.owner, msg.arc, encoder)
        .expect("encoder verified on schedule");
    msg.period = acting_period;
    Ok(())
}

/// Build a fresh session: every owner prepares `t * n` canonical pairs and
/// the first sends are enqueued per topology.
pub fn init_session(config: &ProtocolConfig, keys: &[Key]) -> Result<SessionState> {
    config.validate()?;
    if keys.len() != config.n_parties {
        return Err(Error::InvalidConfig(format!(
            "expected {} keys, got {}",
            config.n_parties,
            keys.len()
        )));
    }
    for (i, key) in keys.iter().enumerate() {
        if key.len() != config.key_length {
            return Err(Error::InvalidConfig(format!(
                "key {i} has {} bits, expected {}",
                key.len(),
                config.key_length
            )));
        }
    }

    let topology = build_topology(config.n_parties, config.resistance)?;
    let mut rng = SessionRng::seed_from_u64(config.seed);
    let mut transcript = Transcript::default();
    let mut in_flight = BTreeMap::new();

    for owner in 0..config.n_parties {
        for arc in 0..config.resistance {
            let pairs: Vec<PairState> = (0..config.key_length).map(|_| prepare_pair()).collect();
            let (payload, records) = insert_decoys(pairs, config.decoys_per_hop, &mut rng);
            let receiver = topology.encoders(owner, arc)[0];
            transcript.push(Event::Send {
                owner,
                arc,
                sender: owner,
                receiver,
                period: 1,
            });
            in_flight.insert(
                (owner, arc),
                TravelMessage {
                    owner,
                    arc,
                    sender: owner,
                    receiver,
                    period: 1,
                    payload,
                    decoy_records: records,
                },
            );
        }
    }

    let participants = keys
        .iter()
        .enumerate()
        .map(|(index, key)| ParticipantState {
            index,
            secret_key: key.clone(),
            returned_arcs: vec![None; config.resistance],
            status: PartyStatus::Running,
            final_key: None,
        })
        .collect();

    Ok(SessionState {
        config: config.clone(),
        topology,
        participants,
        in_flight,
        period: 1,
        status: SessionStatus::Running,
        transcript,
    rng,
    })
}

impl SessionState {
    pub fn rng_mut(&mut self) -> &mut SessionRng {
        &mut self.rng
    }

    fn abort_all(&mut self, detectors: Vec<usize>) {
        self.transcript.push(Event::Abort {
            period: self.period,
            detectors,
        });
        for p in &mut self.participants {
            p.status = PartyStatus::Aborted;
        }
        self.status = SessionStatus::Aborted;
        self.in_flight.clear();
    }

    /// Deliver, verify and process one hop's message up to (and including)
    /// its detection. Returns the message if detection passed.
    fn receive_and_detect(
        &mut self,
        mut msg: TravelMessage,
        hooks: &mut dyn SessionHooks,
        failures: &mut Vec<usize>,
    ) -> Result<Option<TravelMessage>> {
        hooks.on_transit(&mut msg, &mut self.rng);
        let announcement = std::mem::take(&mut msg.decoy_records);
        self.transcript.push(Event::Announce {
            owner: msg.owner,
            arc: msg.arc,
            announcer: msg.sender,
            period: self.period,
            decoys: announcement.len(),
        });
        let outcome = detect_hop(
            &mut msg,
            &announcement,
            self.config.error_threshold,
            &mut self.rng,
        )?;
        self.transcript.push(Event::Detect {
            owner: msg.owner,
            arc: msg.arc,
            detector: msg.receiver,
            period: self.period,
            passed: outcome.passed(),
            mismatches: outcome.mismatches(),
        });
        if outcome.passed() {
            Ok(Some(msg))
        } else {
            failures.push(msg.receiver);
            Ok(None)
        }
    }

    /// Run one lock-step period end to end.
    pub fn run_period(&mut self, hooks: &mut dyn SessionHooks) -> Result<()> {
        if self.status != SessionStatus::Running {
            return Err(Error::InvalidState(
                "run_period called on a finished session".into(),
            ));
        }
        self.period += 1;
        let period = self.period;

        // Sub-phase 1: receive and detect everything in flight.
        let incoming: Vec<TravelMessage> =
            std::mem::take(&mut self.in_flight).into_values().collect();
        let mut failures = Vec::new();
        let mut held = Vec::new();
        for msg in incoming {
            if let Some(mut msg) = self.receive_and_detect(msg, hooks, &mut failures)? {
                let hop = HopInfo {
                    owner: msg.owner,
                    arc: msg.arc,
                    holder: msg.receiver,
                    period,
                };
                hooks.after_detect(hop, &mut msg, &mut self.rng);
                held.push(msg);
            }
        }
        if !failures.is_empty() {
            self.abort_all(failures);
            return Ok(());
        }

        // Sub-phase 2: classical sync barrier.
        hooks.on_sync(period);

        // Sub-phase 3: encode and forward.
        let mut returning = Vec::new();
        for mut msg in held {
            let holder = msg.receiver;
            let hop = HopInfo {
                owner: msg.owner,
                arc: msg.arc,
                holder,
                period,
            };
            let true_key = self.participants[holder].secret_key.clone();
            let key = hooks.key_for_turn(hop, &true_key);
            encode_hop(
                holder,
                &key,
                &mut msg,
                &self.topology,
                self.config.decoys_per_hop,
                &mut self.rng,
            )?;
            self.transcript.push(Event::Encode {
                owner: msg.owner,
                arc: msg.arc,
                encoder: holder,
                period,
            });
            self.transcript.push(Event::Send {
                owner: msg.owner,
                arc: msg.arc,
                sender: holder,
                receiver: msg.receiver,
                period,
            });
            if msg.receiver == msg.owner {
                returning.push(msg);
            } else {
                self.in_flight.insert((msg.owner, msg.arc), msg);
            }
        }

        // Sub-phase 4: owners verify returned sequences within the same
        // period the last encoder forwarded them.
        let mut final_failures = Vec::new();
        for msg in returning {
            if let Some(msg) = self.receive_and_detect(msg, hooks, &mut final_failures)? {
                let owner = msg.owner;
                let arc = msg.arc;
                self.participants[owner].returned_arcs[arc] = Some(msg.into_pairs());
            }
        }
        if !final_failures.is_empty() {
            self.abort_all(final_failures);
            return Ok(());
        }

        if self.in_flight.is_empty()
            && self
                .participants
                .iter()
                .all(|p| p.returned_arcs.iter().all(Option::is_some))
        {
            self.status = SessionStatus::Complete;
        }
        Ok(())
    }

    /// Measure all returned pairs and compute each participant's final key:
    /// the XOR of every arc's accumulated `r XOR s` results with the
    /// participant's own key. Requires a complete session.
    pub fn finalize_keys(
        &mut self,
        hooks: &mut dyn SessionHooks,
    ) -> Result<Vec<(usize, Option<Key>)>> {
        if self.status != SessionStatus::Complete {
            return Err(Error::InvalidState(
                "finalize_keys requires a complete session".into(),
            ));
        }
        let n = self.config.key_length;
        let period = self.period;
        let mut out = Vec::with_capacity(self.participants.len());
        for i in 0..self.participants.len() {
            let mut acc = Key::zero(n);
            for arc in 0..self.config.resistance {
                let pairs = self.participants[i].returned_arcs[arc]
                    .as_mut()
                    .expect("complete session has all arcs");
                for (bit_index, pair) in pairs.iter_mut().enumerate() {
                    let (r, s) = pair.measure_z(&mut self.rng);
                    if r ^ s {
                        let flipped = !acc.bit(bit_index);
                        acc.set_bit(bit_index, flipped);
                    }
                }
            }
            self.transcript.push(Event::FinalMeasure { owner: i, period });
            acc.xor_in_place(&self.participants[i].secret_key);
            let reported = hooks.reported_key(i, &acc);
            self.participants[i].final_key = Some(reported.clone());
            self.participants[i].status = PartyStatus::Accepted;
            out.push((i, Some(reported)));
        }
        Ok(out)
    }
}

/// Result of a full session run.
#[derive(Debug)]
pub struct SessionOutcome {
    pub statuses: Vec<PartyStatus>,
    /// Reported final keys; `None` for aborted participants.
    pub final_keys: Vec<Option<Key>>,
    /// Count of failed hop detections.
    pub detection_failures: usize,
    /// Period in which the session completed; `None` if it aborted.
    pub completion_period: Option<u32>,
    /// Mid-flight final-key knowledge reported by the strategy, if any.
    pub known_final_key_at: Option<u32>,
    pub transcript: Transcript,
}

/// Initialize, run to completion (or abort) and finalize one session.
pub fn run_session(
    config: &ProtocolConfig,
    keys: &[Key],
    hooks: &mut dyn SessionHooks,
) -> Result<SessionOutcome> {
    let mut session = init_session(config, keys)?;
    hooks.on_start(&session);
    while session.status == SessionStatus::Running {
        session.run_period(hooks)?;
    }
    let completion_period = match session.status {
        SessionStatus::Complete => {
            session.finalize_keys(hooks)?;
            Some(session.period)
        }
        _ => None,
    };
    Ok(SessionOutcome {
        statuses: session.participants.iter().map(|p| p.status).collect(),
        final_keys: session
            .participants
            .iter()
            .map(|p| p.final_key.clone())
            .collect(),
        detection_failures: session.transcript.detection_failures(),
        completion_period,
        known_final_key_at: hooks.known_final_key_at(),
        transcript: session.transcript,
    })
}
