//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line. Run with `cargo test -p mqka-core --test acceptance`
//! (add `-- --nocapture` to see the per-criterion lines).

use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use mqka_core::adversary::{
    enumerate_coalitions, flip_feasibility, known_final_key_period, liu_distance_set,
    CoalitionSpec, InterceptResendEveHooks,
};
use mqka_core::harness::{
    derive_rep_seed, emit_report, parse_scenario, run_once, run_scenario, PartyOutcome,
    ReportFormat, ReportRow, Scenario,
};
use mqka_core::key::Key;
use mqka_core::protocol::{
    build_topology, cabello_efficiency, detect_hop, init_session, qubit_efficiency,
    ProtocolConfig, SessionHooks, SessionRng,
};

fn config(n: usize, t: usize, bits: usize, decoys: usize, seed: u64) -> ProtocolConfig {
    ProtocolConfig {
        n_parties: n,
        resistance: t,
        key_length: bits,
        decoys_per_hop: decoys,
        seed,
        error_threshold: 0.0,
    }
}

fn xor_all(keys: &[Key]) -> Key {
    let mut acc = Key::zero(keys[0].len());
    for k in keys {
        acc.xor_in_place(k);
    }
    acc
}

/// Criterion 1: for all N in 2..=10 and t in 1..N, 50 random key vectors
/// each (n = 32, d = 8), every party accepts and outputs exactly the XOR of
/// all keys. Zero tolerance.
#[test]
fn criterion_1_honest_agreement() {
    let grid: Vec<(usize, usize)> = (2usize..=10)
        .flat_map(|n| (1..n).map(move |t| (n, t)))
        .collect();
    grid.par_iter().for_each(|&(n, t)| {
        for rep in 0..50u64 {
            let master = 0xACCE_0001 ^ (n as u64) << 16 ^ (t as u64) << 8;
            let mut rng = SessionRng::seed_from_u64(derive_rep_seed(master, rep));
            let keys: Vec<Key> = (0..n).map(|_| Key::random(32, &mut rng)).collect();
            let expected = xor_all(&keys);
            let cfg = config(n, t, 32, 8, rng.random());
            let verdict = run_once(&cfg, &keys, None).unwrap();
            assert_eq!(verdict.detection_events, 0);
            for (i, outcome) in verdict.parties.iter().enumerate() {
                match outcome {
                    PartyOutcome::Accepted(key) => {
                        assert_eq!(key, &expected, "N={n} t={t} rep={rep} party={i}")
                    }
                    PartyOutcome::Aborted => panic!("N={n} t={t} rep={rep} party={i} aborted"),
                }
            }
        }
    });
    println!("[acceptance] criterion 1 (honest agreement, N=2..10, all t): PASS");
}

fn attack_scenario(n: usize, t: usize, members: &[usize], seed: u64, reps: usize) -> Scenario {
    let expected = Key::from_hex("c3a5f00f").unwrap();
    let text = format!(
        "[protocol]\nn = {n}\nt = {t}\nkey_length = 32\ndecoys_per_hop = 8\n\
         [adversary]\nstrategy = liu_collusion\nmembers = {}\nexpected = {}\n\
         [run]\nseed = {seed}\nrepetitions = {reps}\nlabel = attack\n",
        members
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(","),
        expected.to_hex()
    );
    parse_scenario(&text).unwrap()
}

/// Criterion 2: baseline (t = 1) attack reproduction for N in {4, 6, 8, 10}.
/// Coalitions at a favorable ring distance force the expected key in every
/// repetition without a single detection event; every other distance never
/// succeeds (coincidences tracked separately).
#[test]
fn criterion_2_baseline_attack_reproduction() {
    let cases: Vec<(usize, usize)> = [4usize, 6, 8, 10]
        .iter()
        .flat_map(|&n| (1..n).map(move |d| (n, d)))
        .collect();
    cases.par_iter().for_each(|&(n, distance)| {
        let scenario = attack_scenario(n, 1, &[0, distance], 0xBA5E ^ n as u64, 100);
        let aggregate = run_scenario(&scenario).unwrap();
        let expected_rate = if liu_distance_set(n).contains(&distance) {
            1.0
        } else {
            0.0
        };
        assert_eq!(
            aggregate.coalition_success_rate,
            Some(expected_rate),
            "N={n} distance={distance}"
        );
        assert_eq!(aggregate.coincidental_success_rate, Some(0.0));
        assert_eq!(
            aggregate.mean_detection_events, 0.0,
            "the collusion attack must be detection-free"
        );
    });
    println!("[acceptance] criterion 2 (baseline attack at liu distances): PASS");
}

/// Criterion 3: the flipping stage is destroyed. Exhaustively over N in
/// 3..=8, t in 2..=N/2 and ALL coalitions of size <= t, the schedule oracle
/// reports overall infeasibility; a deterministic 20% sample of placements
/// is re-run as full quantum simulations (100 repetitions each) and must
/// agree exactly.
#[test]
fn criterion_3_flipping_stage_destroyed() {
    let mut placements: Vec<(usize, usize, BTreeSet<usize>)> = Vec::new();
    for n in 3usize..=8 {
        for t in 2..=(n / 2) {
            if t >= n {
                continue;
            }
            for members in enumerate_coalitions(n, t) {
                placements.push((n, t, members));
            }
        }
    }
    assert!(!placements.is_empty());

    for (n, t, members) in &placements {
        let topology = build_topology(*n, *t).unwrap();
        let spec = CoalitionSpec::liu(members.iter().copied(), Key::zero(32));
        let report = flip_feasibility(&topology, &spec).unwrap();
        assert!(
            !report.overall,
            "oracle claims a feasible flip for N={n} t={t} members={members:?}"
        );
    }

    // Every 5th placement in enumeration order gets the full simulation.
    let sampled: Vec<&(usize, usize, BTreeSet<usize>)> =
        placements.iter().step_by(5).collect();
    sampled.par_iter().for_each(|(n, t, members)| {
        let members_vec: Vec<usize> = members.iter().copied().collect();
        let scenario = attack_scenario(*n, *t, &members_vec, 0xC3 ^ (*n as u64) << 8, 100);
        let aggregate = run_scenario(&scenario).unwrap();
        assert_eq!(
            aggregate.coalition_success_rate,
            Some(0.0),
            "simulation disagrees with oracle: N={n} t={t} members={members_vec:?}"
        );
    });
    println!(
        "[acceptance] criterion 3 (no coalition of size <= t flips, {} placements, {} simulated): PASS",
        placements.len(),
        sampled.len()
    );
}

/// Criterion 4: stealing is not prevented, only delayed to the end. For
/// N = 8, t = 2 the pair {0, 4} and every single participant learn the
/// final key exactly in the final period, in both the oracle and the
/// simulation's reported values.
#[test]
fn criterion_4_stealing_not_prevented() {
    let topology = build_topology(8, 2).unwrap();
    let final_period = topology.completion_period();
    assert_eq!(final_period, 5);

    let pair = CoalitionSpec::liu([0usize, 4], Key::zero(32));
    assert_eq!(
        known_final_key_period(&topology, &pair).unwrap(),
        Some(final_period)
    );

    for i in 0..8 {
        let single = CoalitionSpec::liu([i], Key::zero(32));
        assert_eq!(
            known_final_key_period(&topology, &single).unwrap(),
            Some(final_period),
            "single participant {i}"
        );
    }

    // The simulation must report the same period.
    let scenario = attack_scenario(8, 2, &[0, 4], 0xD4, 20);
    let aggregate = run_scenario(&scenario).unwrap();
    for verdict in &aggregate.verdicts {
        assert_eq!(verdict.known_at, Some(final_period));
        assert_eq!(verdict.completion_period, Some(final_period));
    }
    println!("[acceptance] criterion 4 (steal completes only in the final period): PASS");
}

/// Criterion 5: efficiency formulas, exact rational equality. At t = N-1
/// the qubit efficiency collapses to 1/((kappa+1) N (N-1)); Cabello's
/// measure with the protocol's accounting (c = n, q = t N (n + d), b = 0)
/// equals the closed form on the full grid.
#[test]
fn criterion_5_efficiency_formulas() {
    let kappas = [
        Ratio::new(0u64, 1),
        Ratio::new(1, 2),
        Ratio::new(1, 1),
        Ratio::new(2, 1),
    ];
    for n in 2usize..=12 {
        for &kappa in &kappas {
            let eta = qubit_efficiency(n, n - 1, kappa);
            let expected =
                ((kappa + 1) * Ratio::from_integer((n * (n - 1)) as u64)).recip();
            assert_eq!(eta, expected, "N={n} kappa={kappa}");
        }
        for t in 1..n {
            for &kappa in &kappas {
                let bits = 32u64;
                let decoys = (kappa * Ratio::from_integer(bits)).to_integer();
                assert_eq!(Ratio::new(decoys, bits), kappa, "grid uses exact kappas");
                let qubits = (t * n) as u64 * (bits + decoys);
                assert_eq!(
                    cabello_efficiency(bits, qubits, 0).unwrap(),
                    qubit_efficiency(n, t, kappa),
                    "N={n} t={t} kappa={kappa}"
                );
            }
        }
    }
    println!("[acceptance] criterion 5 (efficiency formulas, exact): PASS");
}

/// Criterion 6: intercept-resend across one hop with d = 16 decoys is
/// caught with empirical frequency within 3 sigma of 1 - (3/4)^16 over 10^4
/// trials, and the per-decoy mismatch frequency sits within 3 sigma of 1/4.
#[test]
fn criterion_6_eavesdropping_detection() {
    let trials = 10_000u64;
    let decoys = 16usize;
    let mut hop_failures = 0usize;
    let mut mismatch_total = 0usize;

    let keys = vec![Key::zero(8), Key::zero(8)];
    for trial in 0..trials {
        let cfg = config(2, 1, 8, decoys, 0x6E_0000 + trial);
        let mut session = init_session(&cfg, &keys).unwrap();
        let mut msg = session.in_flight.remove(&(0, 0)).unwrap();
        let mut rng = SessionRng::seed_from_u64(derive_rep_seed(0xE7E, trial));
        let mut eve = InterceptResendEveHooks::new(BTreeSet::from([(0, 1)]));
        eve.on_transit(&mut msg, &mut rng);
        assert_eq!(eve.intercepted_qubits, 8 + decoys);
        let announcement = std::mem::take(&mut msg.decoy_records);
        let outcome = detect_hop(&mut msg, &announcement, 0.0, &mut rng).unwrap();
        mismatch_total += outcome.mismatches();
        if !outcome.passed() {
            hop_failures += 1;
        }
    }

    let p_detect = 1.0 - 0.75f64.powi(decoys as i32);
    let detect_freq = hop_failures as f64 / trials as f64;
    let sigma_detect = (p_detect * (1.0 - p_detect) / trials as f64).sqrt();
    assert!(
        (detect_freq - p_detect).abs() <= 3.0 * sigma_detect,
        "hop detection frequency {detect_freq} outside {p_detect} +/- {}",
        3.0 * sigma_detect
    );

    let samples = (trials as usize * decoys) as f64;
    let mismatch_freq = mismatch_total as f64 / samples;
    let sigma_decoy = (0.25 * 0.75 / samples).sqrt();
    assert!(
        (mismatch_freq - 0.25).abs() <= 3.0 * sigma_decoy,
        "per-decoy mismatch frequency {mismatch_freq} outside 0.25 +/- {}",
        3.0 * sigma_decoy
    );
    println!(
        "[acceptance] criterion 6 (eavesdropper detection {detect_freq:.5} ~ {p_detect:.5}, per-decoy {mismatch_freq:.4} ~ 0.25): PASS"
    );
}

/// Criterion 7: kernel parity law over 10^5 random Pauli words; the
/// measured r XOR s equals the X-parity of the word on every single sample.
#[test]
fn criterion_7_kernel_parity_law() {
    use mqka_core::qstate::{prepare_pair, PauliOp};
    let ops = [PauliOp::I, PauliOp::X, PauliOp::Z, PauliOp::XZ];
    let mut rng = SessionRng::seed_from_u64(0x7A717);
    for sample in 0..100_000 {
        let len = rng.random_range(0..=8);
        let mut pair = prepare_pair();
        let mut parity = false;
        for _ in 0..len {
            let op = ops[rng.random_range(0..4)];
            pair.apply_travel_pauli(op);
            parity ^= op.flips_bit();
        }
        let (r, s) = pair.measure_z(&mut rng);
        assert_eq!(r ^ s, parity, "sample {sample}");
    }
    println!("[acceptance] criterion 7 (parity law, 10^5 words, zero tolerance): PASS");
}

/// Criterion 8: two runs of the same scenario file with the same seed
/// produce byte-identical reports, in both formats.
#[test]
fn criterion_8_determinism() {
    let text = "\
[protocol]
n = 6
t = 2
key_length = 32
decoys_per_hop = 8

[adversary]
strategy = liu_collusion
members = 0,3
expected = 0f1e2d3c

[run]
seed = 424242
repetitions = 25
label = determinism-check
";
    let render = || {
        let scenario = parse_scenario(text).unwrap();
        let aggregate = run_scenario(&scenario).unwrap();
        let row = ReportRow::from_aggregate(&scenario, &aggregate);
        let json = emit_report(std::slice::from_ref(&row), ReportFormat::JsonLines).unwrap();
        let csv = emit_report(std::slice::from_ref(&row), ReportFormat::Csv).unwrap();
        (json, csv)
    };
    let (json_a, csv_a) = render();
    let (json_b, csv_b) = render();
    assert_eq!(json_a, json_b, "JSON reports must be byte-identical");
    assert_eq!(csv_a, csv_b, "CSV reports must be byte-identical");
    println!("[acceptance] criterion 8 (byte-identical reports): PASS");
}
