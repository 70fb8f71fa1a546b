use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use tissuelink_core::gesture::GestureConfig;
use tissuelink_core::protocol::{
    decode_message, encode_message, ClientId, Measurement, Message, Payload, SessionState, StateDelta,
    Update, VolumeTransform,
};
use tissuelink_core::scene::load_scene;
use tissuelink_core::trace::{load_trace, replay_offline};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Points on a regular lattice spanning [-13, 13]^3.
fn lattice(n: usize) -> Vec<[f64; 3]> {
    let step = 26.0 / n as f64;
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push([i, j, k].map(|v| -13.0 + (v as f64 + 0.5) * step));
            }
        }
    }
    out
}

fn sample_delta() -> StateDelta {
    StateDelta::new(vec![
        Update::ChannelWindow { channel: 1, lo: 0.1, hi: 0.8 },
        Update::ChannelOpacity { channel: 2, opacity: 0.5 },
        Update::Transform(VolumeTransform {
            translation: [0.1, 1.2, -0.4],
            rotation: [1.0, 0.0, 0.0, 0.0],
            scale: 2.0,
        }),
        Update::Selection(["cube_1".to_string(), "cell_1".to_string()].into()),
        Update::Measurement {
            id: "m1".into(),
            value: Some(Measurement::new("m1", [0.0; 3], [3.0, 4.0, 0.0], true)),
        },
    ])
}

fn containment(c: &mut Criterion) {
    let sphere = load_scene(fixtures().join("scenes/icosphere")).unwrap();
    let points = lattice(20);
    c.bench_function("containment/icosphere_8000_points", |b| {
        b.iter(|| points.iter().filter(|p| sphere.query_point(**p).is_some()).count())
    });
    let demo = load_scene(fixtures().join("scenes/demo")).unwrap();
    c.bench_function("containment/demo_single_point", |b| {
        b.iter(|| demo.query_point(black_box([47.0, 47.0, 47.0])))
    });
}

fn merge(c: &mut Criterion) {
    let delta = sample_delta();
    let mut seq = 0;
    c.bench_function("merge/apply_delta", |b| {
        b.iter_batched(
            SessionState::default,
            |mut s| {
                seq += 1;
                s.apply_delta(&delta, seq, ClientId(7))
            },
            BatchSize::SmallInput,
        )
    });
}

fn codec(c: &mut Criterion) {
    let msg = Message::new(Payload::Delta(sample_delta())).with_seq(42);
    let bytes = encode_message(&msg);
    c.bench_function("codec/encode_delta", |b| b.iter(|| encode_message(black_box(&msg))));
    c.bench_function("codec/decode_delta", |b| b.iter(|| decode_message(black_box(&bytes)).unwrap()));
}

fn gesture(c: &mut Criterion) {
    let scene = load_scene(fixtures().join("scenes/demo")).unwrap();
    let frames = load_trace(fixtures().join("traces/zoom_2x.jsonl")).unwrap();
    let config = GestureConfig::default();
    c.bench_function("gesture/replay_zoom_trace", |b| {
        b.iter(|| replay_offline(&scene, &frames, &config).unwrap())
    });
}

criterion_group!(benches, containment, merge, codec, gesture);
criterion_main!(benches);
