use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gesture_irr::matcher::overlap::{overlap_pairs, same_kind_components};
use gesture_irr::sim::{simulate_meal, MealModel, NoiseProfile, SimConfig};
use gesture_irr::{match_pair, TimingConfig};

fn config(meal_length_s: f64) -> SimConfig {
    SimConfig {
        meals: 1,
        model: MealModel {
            meal_length_s,
            ..Default::default()
        },
        noise: NoiseProfile {
            jitter_std_ms: 300.0,
            p_supra: 0.2,
            p_split: 0.08,
            p_merge: 0.05,
            p_miss: 0.05,
            p_relabel: 0.05,
            p_straddle: 0.05,
            max_split_parts: 4,
        },
    }
}

fn bench_matching(c: &mut Criterion) {
    let cfg = TimingConfig::default();
    let mut group = c.benchmark_group("match_pair");
    for minutes in [10u32, 60, 240] {
        let m = simulate_meal(&config(minutes as f64 * 60.0), &cfg, 1, 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{minutes}min")), &m, |b, m| {
            b.iter(|| match_pair(&m.truth, &m.perturbed, &m.events, &cfg).unwrap())
        });
    }
    group.finish();

    let m = simulate_meal(&config(3600.0), &cfg, 2, 0).unwrap();
    let (a, b) = (m.truth.segments(), m.perturbed.segments());
    c.bench_function("overlap_pairs/60min", |bench| bench.iter(|| overlap_pairs(a, b)));
    let pairs = overlap_pairs(a, b);
    c.bench_function("same_kind_components/60min", |bench| {
        bench.iter(|| same_kind_components(a, b, &pairs))
    });
}

criterion_group!(benches, bench_matching);
criterion_main!(benches);
