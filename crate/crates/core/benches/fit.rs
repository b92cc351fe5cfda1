//! Sequential against parallel execution for the node-wise fits and for
//! stability selection.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixcg::{
    fit_all, gen_graph, gen_params, sample, stability_select, Execution, FitAllOptions, GraphSpec,
    GridSpec, MixedDataset, MixedDims, ParamGenSpec, StabilityOptions,
};

fn chain_data(q: usize, p: usize, n: usize) -> MixedDataset {
    let dims = MixedDims::binary(q, p);
    let g = gen_graph(&GraphSpec::chain(dims, q + p - 1, 1)).unwrap();
    let params = gen_params(&g, &ParamGenSpec::seeded(1)).unwrap();
    sample(&params, n, 1).unwrap()
}

fn bench_fit_all(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_all");
    group.sample_size(10);
    for (q, p) in [(4, 16), (8, 40)] {
        let data = chain_data(q, p, 200);
        for exec in [Execution::Sequential, Execution::Parallel] {
            let options = FitAllOptions::default()
                .with_grid(GridSpec::Auto {
                    len: 20,
                    ratio: 0.05,
                })
                .with_execution(exec);
            group.bench_with_input(
                BenchmarkId::new(format!("{exec:?}"), format!("q{q}_p{p}")),
                &data,
                |b, d| b.iter(|| fit_all(black_box(d), &options).unwrap()),
            );
        }
    }
    group.finish();
}

fn bench_stability(c: &mut Criterion) {
    let mut group = c.benchmark_group("stability");
    group.sample_size(10);
    let data = chain_data(4, 16, 200);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let mut options = StabilityOptions::new(0.05, 3);
        options.subsamples = 20;
        options.fit.execution = exec;
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| stability_select(black_box(&data), &options).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit_all, bench_stability);
criterion_main!(benches);
