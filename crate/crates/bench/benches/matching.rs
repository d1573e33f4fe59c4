//! Matching throughput: signature dissimilarity and DET metric computation.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use iristex::eval::{det_metrics, dissimilarity, run_verification, ProbeClaim, ScoreSet, Signature};

fn random_signature(rng: &mut ChaCha8Rng, class_id: usize, sample_id: usize) -> Signature {
    let values: Vec<f32> = (0..1024).map(|_| rng.gen_range(0.0f32..1.0)).collect();
    Signature::new(values, class_id, sample_id).unwrap()
}

fn bench_dissimilarity(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_signature(&mut rng, 0, 0);
    let b = random_signature(&mut rng, 1, 0);
    c.bench_function("dissimilarity 1024-d", |bch| {
        bch.iter(|| std::hint::black_box(dissimilarity(&a, &b).unwrap()))
    });
}

fn bench_verification(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gallery: Vec<Signature> = (0..20)
        .flat_map(|class| {
            (0..5)
                .map(|s| random_signature(&mut rng, class, s))
                .collect::<Vec<_>>()
        })
        .collect();
    let probes: Vec<ProbeClaim> = (0..100)
        .map(|i| ProbeClaim {
            signature: random_signature(&mut rng, i % 20, 99),
            claimed_class: (i * 7) % 20,
        })
        .collect();
    c.bench_function("verification 100 probes x 20 identities", |bch| {
        bch.iter(|| std::hint::black_box(run_verification(&gallery, &probes).unwrap()))
    });
}

fn bench_det_metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scores = ScoreSet {
        genuine: (0..2000).map(|_| rng.gen_range(0.0f32..1.0)).collect(),
        imposter: (0..2000).map(|_| rng.gen_range(0.2f32..1.4)).collect(),
    };
    c.bench_function("det metrics 4000 scores", |bch| {
        bch.iter(|| std::hint::black_box(det_metrics(&scores).unwrap().eer))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_dissimilarity, bench_verification, bench_det_metrics
}
criterion_main!(benches);
