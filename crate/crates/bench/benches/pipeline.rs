use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fpclass_bench::{random_layer, ridge_image, unit_batch};
use fpclass_core::orientation::{block_orientation, DEFAULT_BLOCK};
use fpclass_core::sae::{sae_cost_grad, SaeHyper};
use fpclass_core::softmax::{self, SoftmaxModel};
use fpclass_core::synthgen::{zero_pole_field, SingularityLayout};
use fpclass_core::ClassLabel;

fn sae(c: &mut Criterion) {
    let batch = unit_batch(250, 1250, 1);
    let layer = random_layer(1250, 100, 2);
    let h = SaeHyper::default();
    c.bench_function("sae_cost_grad 250x1250 -> 100", |b| {
        b.iter(|| sae_cost_grad(black_box(&layer), batch.view(), &h).unwrap())
    });
}

fn softmax_grad(c: &mut Criterion) {
    let x = unit_batch(500, 100, 3);
    let labels: Vec<ClassLabel> = (0..500).map(|i| ClassLabel::ALL[i % 4]).collect();
    let model = SoftmaxModel::new(unit_batch(4, 101, 4), 1e-4).unwrap();
    c.bench_function("softmax cost_grad 500x100", |b| {
        b.iter(|| softmax::cost_grad(black_box(&model), x.view(), &labels, 1e-4).unwrap())
    });
}

fn orientation(c: &mut Criterion) {
    let img = ridge_image(512, 0.7);
    c.bench_function("block_orientation 512x512", |b| {
        b.iter(|| block_orientation(black_box(&img), DEFAULT_BLOCK).unwrap())
    });
}

fn synth(c: &mut Criterion) {
    let layout = SingularityLayout {
        cores: vec![(12.0, 10.0)],
        deltas: vec![(6.0, 18.0)],
        background_angle: 0.1,
    };
    c.bench_function("zero_pole_field 25x25", |b| {
        b.iter(|| zero_pole_field(black_box(&layout), 25, 25).unwrap())
    });
}

criterion_group!(benches, sae, softmax_grad, orientation, synth);
criterion_main!(benches);
