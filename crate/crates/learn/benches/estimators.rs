use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lieopt_core::{BaseDistribution, Execution, GroupElement, GroupKind};
use lieopt_learn::estimator::{affine_directions, multiplicative_direction, AffineConstants};
use lieopt_learn::net::{init_params, InitOptions, LossSpec, MaskMode, Mlp, NetObjective};
use lieopt_learn::{Dataset, MCConfig};
use std::hint::black_box;

fn synthetic(n: usize, dim: usize, classes: usize) -> Dataset {
    let inputs = (0..n * dim).map(|i| ((i * 7919) % 255) as f64 / 255.0).collect();
    let labels = (0..n).map(|i| i % classes).collect();
    Dataset::new(inputs, labels, dim, classes)
}

fn bench(c: &mut Criterion) {
    let net = Mlp::new(&[64, 32, 10]).unwrap();
    let data = synthetic(256, 64, 10);
    let mask_off = lieopt_learn::net::SignMask::ones(net.num_params());
    let batch: Vec<usize> = (0..32).collect();
    let spec = LossSpec { reg: 1.0, dataset_size: data.len() };

    let (gm, mask) = init_params(&net, MaskMode::PerNode, GroupKind::Multiplicative, 1, InitOptions::default()).unwrap();
    let mult = NetObjective { net: &net, mask: &mask, spec, data: &data };
    let (ga, _) = init_params(&net, MaskMode::None, GroupKind::DiagAffine, 1, InitOptions::default()).unwrap();
    let aff = NetObjective { net: &net, mask: &mask_off, spec, data: &data };
    let consts = AffineConstants { c_x: 2.0, c_y: 1.0 };

    let mut group = c.benchmark_group("mc_direction");
    for k in [4usize, 16] {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let cfg = MCConfig::new(k, 3, 0.01).with_exec(exec);
            let label = format!("{exec:?}");
            group.bench_with_input(BenchmarkId::new(format!("multiplicative/{label}"), k), &cfg, |b, cfg| {
                b.iter(|| multiplicative_direction(&mult, &BaseDistribution::Rayleigh, black_box(&gm), cfg, &batch).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("affine/{label}"), k), &cfg, |b, cfg| {
                b.iter(|| {
                    affine_directions(&aff, &BaseDistribution::Gaussian { sigma: 1.0 }, black_box(&ga), cfg, &batch, consts)
                        .unwrap()
                })
            });
        }
    }
    group.finish();

    let g = GroupElement::multiplicative(vec![1.0; 1 << 16]).unwrap();
    c.bench_function("noise_fill_rayleigh_65536", |b| {
        b.iter(|| BaseDistribution::Rayleigh.sample_for(GroupKind::Multiplicative, g.dim(), 1, 5))
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
