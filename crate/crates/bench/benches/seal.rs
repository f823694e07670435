use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use odoq_bench::{example_query, example_response};
use odoq_core::seal::{open_request, open_response, seal_request, seal_response, SessionSecrets};
use odoq_core::{encode_message, generate_keypair, Suite};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn request(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let pair = generate_keypair(Suite::DEFAULT, 0, &mut rng).unwrap();
    let secrets = SessionSecrets::generate(&mut rng);
    let wire = encode_message(&example_query()).unwrap();
    let sealed = seal_request(pair.config(), &wire, &secrets, &mut rng).unwrap();
    c.bench_function("seal request", |b| {
        b.iter(|| seal_request(pair.config(), black_box(&wire), &secrets, &mut rng).unwrap())
    });
    c.bench_function("open request", |b| b.iter(|| open_request(&pair, black_box(&sealed)).unwrap()));
}

fn response(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let secrets = SessionSecrets::generate(&mut rng);
    let msg = example_response();
    let wire = encode_message(&msg).unwrap();
    let sealed = seal_response(&secrets, &wire, &msg.question.name).unwrap();
    c.bench_function("seal response", |b| {
        b.iter(|| seal_response(&secrets, black_box(&wire), &msg.question.name).unwrap())
    });
    c.bench_function("open response", |b| b.iter(|| open_response(&secrets, black_box(&sealed)).unwrap()));
}

criterion_group!(benches, request, response);
criterion_main!(benches);
