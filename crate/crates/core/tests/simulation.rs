mod common;

use gesture_irr::indexcmp::compare_to_index;
use gesture_irr::ingest::load_corpus;
use gesture_irr::sim::{
    check_recovery, generate_meal, simulate, to_corpus, MealModel, NoiseProfile, Perturbation, SimConfig, SIM_RATER,
};
use gesture_irr::stats::{duration_stats, rater_table};
use gesture_irr::{match_pair, GestureKind, MatchCase, TimeUnit, TimingConfig};

fn cfg() -> TimingConfig {
    TimingConfig::default()
}

#[test]
fn ten_thousand_bites_match_model_mean() {
    let model = MealModel::default().only(GestureKind::Bite);
    let mut total = 0u64;
    let mut n = 0u64;
    let mut seed = 0;
    while n < 10_000 {
        let (t, _) = generate_meal("m", &model, &cfg(), seed).unwrap();
        for s in t.segments() {
            total += s.duration_ms();
            n += 1;
        }
        seed += 1;
    }
    let mean_s = total as f64 / n as f64 / 1000.0;
    let want = model.bite.duration.mean_s;
    assert!((mean_s - want).abs() / want <= 0.05, "mean {mean_s} s");
}

#[test]
fn simulated_corpus_is_byte_identical_across_runs() {
    let config = SimConfig {
        meals: 6,
        noise: common::mixed_noise(),
        ..Default::default()
    };
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        to_corpus(&simulate(&config, &cfg(), 42).unwrap())
            .write_to(d.path())
            .unwrap();
    }
    let read = |d: &tempfile::TempDir| {
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        for meal in std::fs::read_dir(d.path()).unwrap() {
            let meal = meal.unwrap().path();
            for f in std::fs::read_dir(&meal).unwrap() {
                let f = f.unwrap().path();
                let rel = f.strip_prefix(d.path()).unwrap().display().to_string();
                files.push((rel, std::fs::read(&f).unwrap()));
            }
        }
        files.sort();
        files
    };
    let first = read(&dirs[0]);
    assert!(first.len() >= 18);
    assert_eq!(first, read(&dirs[1]));
}

#[test]
fn corpus_survives_disk_round_trip() {
    let config = SimConfig {
        meals: 4,
        noise: common::mixed_noise(),
        ..Default::default()
    };
    let corpus = to_corpus(&simulate(&config, &cfg(), 9).unwrap());
    let dir = tempfile::tempdir().unwrap();
    corpus.write_to(dir.path()).unwrap();
    let load = load_corpus(dir.path(), &cfg(), TimeUnit::Millis).unwrap();
    assert!(load.issues.is_empty(), "{:?}", load.issues);
    assert_eq!(load.corpus, corpus);
}

#[test]
fn duration_stats_match_recount() {
    let config = SimConfig {
        meals: 20,
        noise: common::mixed_noise(),
        ..Default::default()
    };
    let corpus = to_corpus(&simulate(&config, &cfg(), 5).unwrap());
    let stats = duration_stats(&corpus, &cfg());
    for kind in GestureKind::LABELED {
        let d: Vec<f64> = corpus
            .timelines()
            .flat_map(|t| t.segments())
            .filter(|s| s.kind == kind)
            .map(|s| s.duration_ms() as f64)
            .collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let got = stats.get(kind);
        assert_eq!(got.count, d.len() as u64);
        assert!((got.mean_ms - mean).abs() < 1e-6, "{kind}");
        assert!((got.std_ms - var.sqrt()).abs() < 1e-6, "{kind}");
        assert_eq!(got.min_ms as f64, d.iter().cloned().fold(f64::INFINITY, f64::min));
        assert_eq!(got.max_ms as f64, d.iter().cloned().fold(0.0, f64::max));
    }
}

#[test]
fn ground_truth_agrees_with_its_own_index_labels() {
    for seed in 0..50 {
        let (t, events) = generate_meal("m", &MealModel::default(), &cfg(), seed).unwrap();
        let (_, c) = compare_to_index(&t, &events, Default::default());
        let intake = t.segments().iter().filter(|s| s.kind.is_intake()).count() as u64;
        assert_eq!(c.agreement, intake);
        assert_eq!(c.total(), intake);
    }
}

#[test]
fn rater_table_matches_provenance() {
    let config = SimConfig {
        meals: 40,
        noise: common::mixed_noise(),
        ..Default::default()
    };
    let meals = simulate(&config, &cfg(), 77).unwrap();
    let reports: Vec<_> = meals
        .iter()
        .map(|m| match_pair(&m.truth, &m.perturbed, &m.events, &cfg()).unwrap())
        .collect();
    for (m, r) in meals.iter().zip(&reports) {
        let rec = check_recovery(&m.truth, &m.tags, r);
        assert!(rec.misses.is_empty(), "{:?}", rec.misses);
    }

    // expected per-rater tallies straight from the tags
    let (mut exact, mut ba, mut mistakes, mut segments, mut missed) = (0, 0, 0, 0, 0);
    for m in &meals {
        segments += m.tags.len() as u64;
        for t in &m.tags {
            match t.perturbation {
                // one group per merged pair
                Perturbation::Merge { with } if with == t.gt_index => {}
                Perturbation::Merge { .. } => ba += 1,
                Perturbation::Delete => {
                    mistakes += 1;
                    missed += 1;
                }
                Perturbation::Relabel { .. } => mistakes += 1,
                // the inserted segment is the perturbed rater's mistake
                Perturbation::Straddle { .. } => {
                    ba += 1;
                    mistakes += 1;
                }
                _ if t.expected == MatchCase::Agreement => exact += 1,
                _ => ba += 1,
            }
        }
    }

    let table = rater_table(&reports, 8);
    let sim = table.row(SIM_RATER).unwrap();
    assert_eq!(sim.meals, 40);
    assert_eq!((sim.exact, sim.boundary_ambiguity, sim.mistake), (exact, ba, mistakes));
    let gt = table.row("gt").unwrap();
    assert_eq!((gt.exact, gt.boundary_ambiguity, gt.mistake), (exact, ba, 0));

    // injected miss rate shows up at the configured level
    let rate = missed as f64 / segments as f64;
    assert!((rate - config.noise.p_miss).abs() < 0.01, "{rate}");
    assert!(table.row(SIM_RATER).is_some() && rater_table(&reports, 41).rows.is_empty());
}

#[test]
fn each_perturbation_alone_is_recovered() {
    let profiles = [
        NoiseProfile {
            jitter_std_ms: 250.0,
            ..Default::default()
        },
        NoiseProfile {
            jitter_std_ms: 250.0,
            p_supra: 1.0,
            ..Default::default()
        },
        NoiseProfile {
            p_split: 1.0,
            max_split_parts: 5,
            ..Default::default()
        },
        NoiseProfile {
            p_merge: 1.0,
            ..Default::default()
        },
        NoiseProfile {
            p_miss: 1.0,
            ..Default::default()
        },
        NoiseProfile {
            p_relabel: 1.0,
            ..Default::default()
        },
        NoiseProfile {
            p_straddle: 1.0,
            ..Default::default()
        },
    ];
    for noise in profiles {
        let config = SimConfig {
            meals: 30,
            noise,
            ..Default::default()
        };
        for m in simulate(&config, &cfg(), 1).unwrap() {
            let r = match_pair(&m.truth, &m.perturbed, &m.events, &cfg()).unwrap();
            let rec = check_recovery(&m.truth, &m.tags, &r);
            assert!(rec.misses.is_empty(), "{noise:?}: {:?}", rec.misses);
        }
    }
}
