use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dp_evalue::dist::{SimpleDistribution, TestingPair};
use dp_evalue::eprocess::{SequentialTest, TwoSidedTest};
use dp_evalue::harness::stream::PairedStream;
use dp_evalue::par::map_trials_seq;
use dp_evalue::seed::derive_seed;

fn run_all<M>(test: &TwoSidedTest, alt: &SimpleDistribution, trials: usize, map: M) -> u64
where
    M: Fn(usize, &(dyn Fn(usize) -> u64 + Sync)) -> Vec<u64>,
{
    let one = |i: usize| {
        let mut stream = PairedStream::new(alt.clone(), derive_seed(1, &[i as u64, 0]));
        test.run(&mut stream.replay(), 100_000, derive_seed(1, &[i as u64, 1])).unwrap().stopping_time
    };
    map(trials, &one).into_iter().sum()
}

fn bench_trials(c: &mut Criterion) {
    let null = SimpleDistribution::bernoulli(0.3).unwrap();
    let alt = SimpleDistribution::bernoulli(0.6).unwrap();
    let pair = TestingPair::new(null, alt.clone()).unwrap();
    let test = TwoSidedTest::optimal(&pair, 1.0, 3.0, 0.025, 0.025, 100_000).unwrap();

    let mut g = c.benchmark_group("two_sided_trials");
    g.sample_size(10);
    for trials in [64usize, 512] {
        g.bench_with_input(BenchmarkId::new("sequential", trials), &trials, |b, &n| {
            b.iter(|| run_all(&test, &alt, n, |n, f| map_trials_seq(n, f)))
        });
        #[cfg(feature = "parallel")]
        g.bench_with_input(BenchmarkId::new("rayon", trials), &trials, |b, &n| {
            b.iter(|| run_all(&test, &alt, n, |n, f| dp_evalue::par::map_trials_par(n, f)))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_trials);
criterion_main!(benches);
