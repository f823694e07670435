use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use odoq_bench::{example_query, example_response};
use odoq_core::{decode_envelope, decode_message, encode_envelope, encode_message, Envelope};

fn dns(c: &mut Criterion) {
    let query = example_query();
    let response = example_response();
    let wire = encode_message(&response).unwrap();
    c.bench_function("dns encode query", |b| b.iter(|| encode_message(black_box(&query)).unwrap()));
    c.bench_function("dns decode response", |b| b.iter(|| decode_message(black_box(&wire)).unwrap()));
}

fn envelope(c: &mut Criterion) {
    let e = Envelope::query("quic://resolver.example:8853", vec![0xab; 160]).unwrap();
    let wire = encode_envelope(&e);
    c.bench_function("envelope encode", |b| b.iter(|| encode_envelope(black_box(&e))));
    c.bench_function("envelope decode", |b| b.iter(|| decode_envelope(black_box(&wire)).unwrap()));
}

criterion_group!(benches, dns, envelope);
criterion_main!(benches);
