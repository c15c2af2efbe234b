use bgadl_core::acquisition::score_pool;
use bgadl_core::nets::{Classifier, NetConfig};
use bgadl_core::parallel::Workers;
use bgadl_core::rng::StreamKey;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pool_scoring(c: &mut Criterion) {
    let dim = 784;
    let classifier = Classifier::new(&NetConfig::desk_default(dim, 10), &mut StreamKey::root(1).stream()).unwrap();
    let mut rng = StreamKey::root(2).stream();
    let pool: Vec<Vec<f64>> = (0..200).map(|_| (0..dim).map(|_| rng.uniform()).collect()).collect();
    let ids: Vec<u64> = (0..pool.len() as u64).collect();
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .max(2);

    let mut group = c.benchmark_group("bald_pool_scoring");
    group.sample_size(10);
    for workers in [Workers::sequential(), Workers::new(threads)] {
        group.bench_with_input(BenchmarkId::from_parameter(workers.get()), &workers, |b, &w| {
            b.iter(|| score_pool(&classifier, |i| pool[i].as_slice(), &ids, 25, StreamKey::root(3), w).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pool_scoring);
criterion_main!(benches);
