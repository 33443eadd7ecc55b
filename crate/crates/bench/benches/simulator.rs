//! Criterion benchmarks: kernel throughput, whole-session cost, and the
//! schedule oracle.

use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use mqka_core::adversary::{enumerate_coalitions, flip_feasibility, CoalitionSpec};
use mqka_core::key::Key;
use mqka_core::protocol::{
    build_topology, run_session, HonestHooks, ProtocolConfig, SessionRng,
};
use mqka_core::qstate::{prepare_pair, PauliOp};

fn config(n: usize, t: usize, bits: usize, decoys: usize) -> ProtocolConfig {
    ProtocolConfig {
        n_parties: n,
        resistance: t,
        key_length: bits,
        decoys_per_hop: decoys,
        seed: 7,
        error_threshold: 0.0,
    }
}

fn random_keys(n: usize, bits: usize) -> Vec<Key> {
    let mut rng = SessionRng::seed_from_u64(11);
    (0..n).map(|_| Key::random(bits, &mut rng)).collect()
}

fn kernel(c: &mut Criterion) {
    c.bench_function("pair_encode_measure", |b| {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        b.iter(|| {
            let mut pair = prepare_pair();
            pair.apply_travel_pauli(black_box(PauliOp::X));
            pair.apply_travel_pauli(black_box(PauliOp::Z));
            black_box(pair.measure_z(&mut rng))
        })
    });
}

fn honest_session(c: &mut Criterion) {
    let cfg = config(8, 2, 32, 8);
    let keys = random_keys(8, 32);
    c.bench_function("honest_session_n8_t2", |b| {
        b.iter(|| run_session(black_box(&cfg), black_box(&keys), &mut HonestHooks).unwrap())
    });
}

fn collusion_session(c: &mut Criterion) {
    let cfg = config(6, 1, 32, 8);
    let keys = random_keys(6, 32);
    let topology = build_topology(6, 1).unwrap();
    let spec = CoalitionSpec::liu([0usize, 3], Key::from_hex("a5a5a5a5").unwrap());
    c.bench_function("collusion_session_n6_t1", |b| {
        b.iter(|| {
            let mut hooks =
                mqka_core::adversary::execute_strategy(Some(&spec), &topology, 32).unwrap();
            run_session(black_box(&cfg), black_box(&keys), hooks.as_mut()).unwrap()
        })
    });
}

fn schedule_oracle(c: &mut Criterion) {
    let topology = build_topology(8, 2).unwrap();
    let placements: Vec<BTreeSet<usize>> = enumerate_coalitions(8, 2);
    c.bench_function("flip_feasibility_all_pairs_n8", |b| {
        b.iter(|| {
            for members in &placements {
                let spec = CoalitionSpec::liu(members.iter().copied(), Key::zero(8));
                black_box(flip_feasibility(&topology, &spec).unwrap());
            }
        })
    });
}

criterion_group!(benches, kernel, honest_session, collusion_session, schedule_oracle);
criterion_main!(benches);
