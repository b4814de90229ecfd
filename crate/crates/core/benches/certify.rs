use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pulsedamp::analysis::{certify, CertifyOptions};
use pulsedamp::design::{design_pde_exponential, design_system, SystemOptions};
use pulsedamp::spectra::{model_spectrum, Equation, ModelOperator};
use pulsedamp::{Exec, Spectrum};

fn bench_certify(c: &mut Criterion) {
    let wave = model_spectrum(&ModelOperator::new(Equation::Wave, 1, 50)).unwrap();
    let pde = design_pde_exponential(&wave, 1.0).unwrap().design;
    let system_spectrum = Spectrum::new(vec![1.0, 2f64.sqrt(), 2.0]).unwrap();
    let system = design_system(&system_spectrum, 0.5, SystemOptions::default()).unwrap();
    let cases = [("pde-50-modes", &pde, &wave, 5.0), ("system-3-modes", &system, &system_spectrum, 6.0)];

    let mut group = c.benchmark_group("certify");
    group.sample_size(20);
    for (name, design, spectrum, periods) in cases {
        for (label, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            let opts = CertifyOptions::new(periods * design.t0, 256).with_exec(exec);
            group.bench_with_input(BenchmarkId::new(name, label), &opts, |b, opts| {
                b.iter(|| certify(&design.profile, spectrum, &design.certificate.bound, black_box(opts)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_certify);
criterion_main!(benches);
