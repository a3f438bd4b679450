use brwlab::diagrams::{evaluate_truncated, PinnedDiagram};
use brwlab::lattice::{heat_kernel, truncated_green};
use brwlab::moments::{exact_moment, MomentRequest, Truncation};
use brwlab::offspring::OffspringDistribution;
use brwlab::simulator::{EpisodeConfig, PreparedConfig};
use brwlab::skeletons::{enumerate_skeletons, Skeleton};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernels");
    for dim in [2usize, 3] {
        g.bench_with_input(BenchmarkId::new("heat_kernel_n32", dim), &dim, |b, &d| {
            b.iter(|| heat_kernel(d, 32).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("truncated_green_n32", dim), &dim, |b, &d| {
            b.iter(|| truncated_green(d, 32).unwrap())
        });
    }
    g.finish();
}

fn episodes(c: &mut Criterion) {
    let mut g = c.benchmark_group("episodes");
    for dim in [1usize, 3, 5] {
        let cfg = EpisodeConfig::new(dim, OffspringDistribution::binary(), 1024, 1);
        let prepared = PreparedConfig::new(&cfg).unwrap();
        // average progeny per episode, so the throughput reads as particles
        let batch = 2000u64;
        let particles: u64 = (0..batch).map(|i| prepared.run(i).total_progeny).sum();
        g.throughput(Throughput::Elements(particles));
        g.bench_with_input(BenchmarkId::new("binary_cap1024", dim), &prepared, |b, p| {
            b.iter(|| (0..batch).map(|i| p.run(i).total_progeny).sum::<u64>())
        });
    }
    g.finish();
}

fn diagrams(c: &mut Criterion) {
    let mut g = c.benchmark_group("diagrams");
    let cherry = Skeleton::parse("c=1.2.0.0;l=0.2.3").unwrap();
    let pinned = PinnedDiagram::new(cherry, vec![vec![0, 0, 0], vec![0, 0, 0], vec![1, 1, 0]]).unwrap();
    g.bench_function("cherry_d3_n16", |b| b.iter(|| evaluate_truncated(black_box(&pinned), 16).unwrap()));
    g.bench_function("enumerate_k4", |b| b.iter(|| enumerate_skeletons(4).unwrap().len()));
    let request = MomentRequest::at_origin(3, 3, Truncation::Steps { n: 16 }, OffspringDistribution::binary());
    g.bench_function("third_moment_d3_n16", |b| b.iter(|| exact_moment(&request).unwrap().value));
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels, episodes, diagrams
}
criterion_main!(benches);
