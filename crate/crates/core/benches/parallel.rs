//! Serial vs rayon execution of the parallel stages: SVG construction,
//! saddle ground truth, a stress solve and a cascade round.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use geoembed::embedding::{
    cascade_round, distance_scale, euclidean_embed, ground_truth_saddle_distances_with, pair_weights, EmbeddingOptions,
};
use geoembed::mesh::VertexClassification;
use geoembed::optim::{SolverOptions, SymMatrix};
use geoembed::par::Exec;
use geoembed::shapes;
use geoembed::svg::{build_svg_with, SvgParams};

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn stages(c: &mut Criterion) {
    let mesh = shapes::studded_sphere(3, 3, 0.3, 1);
    let class = VertexClassification::classify(&mesh);
    let d = ground_truth_saddle_distances_with(&mesh, &class, Exec::Parallel).unwrap();
    let scale = distance_scale(&d);

    let mut group = c.benchmark_group("stages");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("svg", name), &exec, |b, &exec| {
            b.iter(|| build_svg_with(&mesh, &class, SvgParams::default(), exec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ground_truth", name), &exec, |b, &exec| {
            b.iter(|| ground_truth_saddle_distances_with(&mesh, &class, exec).unwrap())
        });
        let opts = EmbeddingOptions {
            exec,
            stress: SolverOptions::stress().with_max_iterations(50),
            ..EmbeddingOptions::default()
        };
        group.bench_with_input(BenchmarkId::new("stress_50_iterations", name), &opts, |b, opts| {
            b.iter(|| euclidean_embed(&d, 8, opts).unwrap())
        });
        let r = SymMatrix::from_upper(d.len(), exec, |i, j| 0.01 * d.get(i, j));
        let w = pair_weights(&d, scale, exec);
        let qn = SolverOptions::quasi_newton().with_exec(exec).with_max_iterations(50);
        group.bench_with_input(BenchmarkId::new("cascade_round", name), &qn, |b, qn| {
            b.iter(|| cascade_round(&r, &w, scale, qn).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
