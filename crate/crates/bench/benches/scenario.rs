use criterion::{criterion_group, criterion_main, Criterion};
use manetsim_bench::{qcif_clip, small_scenario};
use manetsim_core::run_scenario;
use manetsim_core::scenario::Protocol;

fn scenario(c: &mut Criterion) {
    let clip = qcif_clip(300);
    let mut g = c.benchmark_group("scenario_300_frames");
    g.sample_size(10);
    for (p, n, d) in [(Protocol::Aodv, 9, 100.0), (Protocol::Dsdv, 9, 100.0), (Protocol::Aodv, 25, 150.0)] {
        let cfg = small_scenario(p, n, d, 300);
        g.bench_function(format!("{}_n{n}_d{d}", p.as_str().to_ascii_lowercase()), |b| {
            b.iter(|| run_scenario(&cfg, &clip).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, scenario);
criterion_main!(benches);
