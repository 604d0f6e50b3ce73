use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use markov_coder::prob::ProbVector;
use markov_coder::synth::{rng, uniform_box};
use markov_coder::vq::{dvq, encode_all, EncoderMode, GaussianCodebook};

// One-thread pool is the sequential baseline; the default pool uses every core.
fn encode_and_score(c: &mut Criterion) {
    let mut r = rng(7);
    let data = uniform_box(&mut r, 20_000, 2, 0.0, 1.0).unwrap();
    let code = GaussianCodebook::new(uniform_box(&mut r, 64, 2, 0.0, 1.0).unwrap().points().to_vec(), 0.05, 1.0).unwrap();
    let q = ProbVector::uniform(64).unwrap();
    let mode = EncoderMode::Posterior { beta_scale: 1.0 };

    let mut group = c.benchmark_group("encode_and_score");
    group.sample_size(20);
    for threads in [1, 0] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let label = if threads == 1 { "sequential".to_string() } else { format!("parallel-{}", pool.current_num_threads()) };
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                pool.install(|| {
                    let enc = encode_all(&data, &code, &q, mode).unwrap();
                    dvq(&enc, &code, &data).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, encode_and_score);
criterion_main!(benches);
