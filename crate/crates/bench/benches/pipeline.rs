use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use chinpoint_core::agent::AgentParams;
use chinpoint_core::session::{run_session, NoSink, SessionConfig, Source};
use chinpoint_core::sim::{stream_over_wire, synthesize, Corruption, GestureScript, NoiseModel};
use chinpoint_core::task::{PointingConfig, TaskSetup};
use chinpoint_core::wire::decode_stream;
use chinpoint_core::{ActiveMode, CalibrationProfile, SensorFrame, SignalChain, StreamDecoder};

const SCRIPT: &str = r#"[
    {"duration_ms":2000,"stretch":300},
    {"duration_ms":3000,"ax":700,"ay":-200,"stretch":300,"interp":"linear"},
    {"duration_ms":500,"stretch":800},
    {"duration_ms":4500,"ax":-400,"stretch":300,"interp":"linear"}
]"#;

/// Ten seconds of noisy tilting and clicking at 100 Hz.
fn frames() -> Vec<SensorFrame> {
    let script = GestureScript::from_json(SCRIPT).unwrap();
    let noise = NoiseModel {
        sigma: [4.0, 4.0, 4.0, 6.0],
        tremor_amplitude: 15.0,
        seed: 5,
        ..Default::default()
    };
    synthesize(&script, &noise, 100.0).unwrap()
}

fn wire(c: &mut Criterion) {
    let frames = frames();
    let clean = stream_over_wire(&frames, None).bytes;
    let noisy = stream_over_wire(
        &frames,
        Some(Corruption {
            rate: 0.05,
            seed: 9,
        }),
    )
    .bytes;

    let mut group = c.benchmark_group("wire/decode");
    group.throughput(Throughput::Bytes(clean.len() as u64));
    group.bench_function("clean", |b| {
        b.iter(|| decode_stream(black_box(&clean), StreamDecoder::new()))
    });
    group.bench_function("5%-corrupt", |b| {
        b.iter(|| decode_stream(black_box(&noisy), StreamDecoder::new()))
    });
    group.bench_function("16-byte-chunks", |b| {
        b.iter(|| {
            let mut dec = StreamDecoder::new();
            let mut out = Vec::with_capacity(frames.len());
            for chunk in clean.chunks(16) {
                dec.push_into(black_box(chunk), &mut out);
            }
            out
        })
    });
    group.finish();
}

fn signal(c: &mut Criterion) {
    let frames = frames();
    let mut group = c.benchmark_group("signal");
    group.throughput(Throughput::Elements(frames.len() as u64));
    group.bench_function("chain", |b| {
        b.iter_batched(
            || SignalChain::new(CalibrationProfile::default(), ActiveMode::Pointing).unwrap(),
            |mut chain| {
                let mut events = Vec::new();
                for f in &frames {
                    black_box(chain.process(f, &mut events));
                }
                events
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn session(c: &mut Criterion) {
    let config = |source| SessionConfig {
        session_id: "bench".into(),
        participant: None,
        cohort: None,
        setup: TaskSetup::Pointing(PointingConfig {
            runs: 1,
            trials_per_run: 20,
            seed: 3,
            ..Default::default()
        }),
        source,
        profile: CalibrationProfile::default(),
        realtime: false,
    };
    let params = AgentParams {
        seed: 3,
        ..Default::default()
    };
    let event = config(Source::PointingAgent { params });
    let sensor = config(Source::SensorAgent {
        params,
        rate_hz: 100,
    });

    let mut group = c.benchmark_group("session/20-trials");
    group.sample_size(20);
    group.bench_function("event-agent", |b| {
        b.iter(|| run_session(&event, std::io::sink(), &mut NoSink, None).unwrap())
    });
    group.bench_function("sensor-agent", |b| {
        b.iter(|| run_session(&sensor, std::io::sink(), &mut NoSink, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, wire, signal, session);
criterion_main!(benches);
