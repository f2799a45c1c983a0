use criterion::{criterion_group, criterion_main, Criterion};
use lpvp_core::synthesis::{self, SynthesisRequest};
use lpvp_core::{certify, cr3bp, AffineMatrixFunction, CertifyOptions, Cr3bpConfig, LpvPlant, NormKind, ParameterBox};
use nalgebra::dmatrix;
use std::hint::black_box;
use std::time::Duration;

fn lti_plant() -> LpvPlant {
    LpvPlant::new(
        AffineMatrixFunction::constant(dmatrix![0.0, 1.0; -2.0, -1.0]),
        AffineMatrixFunction::zeros(2, 1),
        AffineMatrixFunction::constant(dmatrix![0.0; 1.0]),
        AffineMatrixFunction::constant(dmatrix![1.0, 0.0]),
        AffineMatrixFunction::zeros(1, 1),
        AffineMatrixFunction::zeros(1, 1),
        AffineMatrixFunction::constant(dmatrix![1.0, 0.0]),
        vec![1.0],
        ParameterBox::empty(),
    )
    .unwrap()
}

fn lti(c: &mut Criterion) {
    for norm in [NormKind::H2, NormKind::Hinf] {
        let req = SynthesisRequest::new(lti_plant(), norm, 0.45);
        c.bench_function(&format!("lti {norm} synthesis"), |b| {
            b.iter(|| synthesis::synthesize(black_box(&req)).unwrap())
        });
    }
}

fn cr3bp_case(c: &mut Criterion) {
    let plant = cr3bp::cr3bp_plant(&Cr3bpConfig::default()).unwrap();
    let mut group = c.benchmark_group("cr3bp");
    group.sample_size(10).measurement_time(Duration::from_secs(30));
    for norm in [NormKind::H2, NormKind::Hinf] {
        let mut req = SynthesisRequest::new(plant.clone(), norm, 0.1);
        req.pole_radius = Some(30.0);
        group.bench_function(format!("{norm} synthesis, 64 vertices"), |b| {
            b.iter(|| synthesis::synthesize(black_box(&req)).unwrap())
        });
        let result = synthesis::synthesize(&req).unwrap();
        group.bench_function(format!("{norm} certification, 164 points"), |b| {
            b.iter(|| certify(&plant, black_box(&result), &CertifyOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lti, cr3bp_case);
criterion_main!(benches);
