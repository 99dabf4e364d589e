use rrcnn_core::kv::KvMap;
use rrcnn_core::synth::{describe, expected_db, generate, Cover, Scene, SceneConfig};

fn config(seed: u64) -> SceneConfig {
    SceneConfig {
        height: 160,
        width: 160,
        seed,
        ..Default::default()
    }
}

/// Per-pixel dB difference between two acquisitions of one polarisation,
/// averaged over pixels selected by `keep`.
fn mean_change(scene: &Scene, t0: usize, t1: usize, pol: usize, keep: impl Fn(Cover) -> bool) -> (f64, usize) {
    let a = scene.stack.channel(2 * t0 + pol);
    let b = scene.stack.channel(2 * t1 + pol);
    let mut sum = 0.0;
    let mut n = 0;
    for (q, &c) in scene.cover.iter().enumerate() {
        if keep(c) {
            sum += f64::from(b[q]) - f64::from(a[q]);
            n += 1;
        }
    }
    (sum / n as f64, n)
}

/// Standard deviation of speckle in dB for `looks`-look gamma intensity.
fn speckle_db_std(looks: f64) -> f64 {
    // 10/ln(10) * sqrt(trigamma(L)); trigamma by series plus asymptotic tail
    let mut tri = 0.0;
    let mut x = looks;
    while x < 20.0 {
        tri += 1.0 / (x * x);
        x += 1.0;
    }
    tri += 1.0 / x + 1.0 / (2.0 * x * x) + 1.0 / (6.0 * x.powi(3)) - 1.0 / (30.0 * x.powi(5));
    10.0 / std::f64::consts::LN_10 * tri.sqrt()
}

#[test]
fn same_seed_is_bit_identical() {
    let a = generate(&config(4)).unwrap();
    let b = generate(&config(4)).unwrap();
    assert_eq!(
        a.stack.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.stack.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(a.labels, b.labels);
    let c = generate(&config(5)).unwrap();
    assert_ne!(a.labels, c.labels);
}

#[test]
fn stack_layout_and_label_consistency() {
    let cfg = config(1);
    let scene = generate(&cfg).unwrap();
    assert_eq!(scene.stack.channels(), 14);
    for (&c, &code) in scene.cover.iter().zip(&scene.labels.codes) {
        let want = match c {
            Cover::Forest | Cover::Pasture => 0,
            Cover::Event(t) => {
                assert!((1..cfg.timesteps as u8).contains(&t));
                1
            }
            Cover::Past => 2,
        };
        assert_eq!(code, want);
    }
}

#[test]
fn without_recovery_the_endpoints_keep_full_contrast() {
    let cfg = SceneConfig {
        recovery_db: 0.0,
        ..config(2)
    };
    for t in 1..cfg.timesteps {
        for pol in 0..2 {
            let e = Cover::Event(t as u8);
            assert_eq!(
                expected_db(&cfg, e, cfg.timesteps - 1, pol) - expected_db(&cfg, e, 0, pol),
                -cfg.drop_db
            );
        }
    }
    let scene = generate(&cfg).unwrap();
    let (d, n) = mean_change(&scene, 0, cfg.timesteps - 1, 0, |c| matches!(c, Cover::Event(_)));
    let se = speckle_db_std(cfg.looks) * (2.0 / n as f64).sqrt();
    assert!((d + cfg.drop_db).abs() < 4.0 * se, "mean change {d} over {n} pixels");
}

#[test]
fn full_recovery_erases_early_events_from_the_endpoints() {
    let cfg = SceneConfig {
        recovery_db: 3.0,
        ..config(3)
    };
    let last = cfg.timesteps - 1;
    let early = |c| matches!(c, Cover::Event(t) if (t as usize) < last);
    let scene = generate(&cfg).unwrap();
    let sd = speckle_db_std(cfg.looks);
    for pol in 0..2 {
        let (d, n) = mean_change(&scene, 0, last, pol, early);
        assert!(n > 100);
        assert!(d.abs() < sd, "endpoint change {d} vs speckle std {sd}");
        assert!(d.abs() < 4.0 * sd * (2.0 / n as f64).sqrt(), "endpoint change {d} is speckle-level");
    }
    // the intermediate acquisition at the event time still shows the drop
    for t in 1..last {
        let (d, n) = mean_change(&scene, 0, t, 0, |c| c == Cover::Event(t as u8));
        if n > 50 {
            assert!((d + cfg.drop_db).abs() < 4.0 * sd * (2.0 / n as f64).sqrt(), "t{t}: {d}");
        }
    }
}

#[test]
fn expected_event_level_drops_once_then_recovers_monotonically() {
    let cfg = SceneConfig::default();
    for ts in 1..cfg.timesteps as u8 {
        for pol in 0..2 {
            let levels: Vec<f64> = (0..cfg.timesteps).map(|t| expected_db(&cfg, Cover::Event(ts), t, pol)).collect();
            let drops = levels.windows(2).filter(|w| w[1] < w[0]).count();
            assert_eq!(drops, 1);
            assert!(levels[ts as usize..].windows(2).all(|w| w[1] >= w[0]));
            assert!(levels.iter().all(|&v| v <= cfg.forest_db[pol]));
        }
    }
}

#[test]
fn speckle_mean_matches_the_configured_level() {
    let cfg = config(6);
    let scene = generate(&cfg).unwrap();
    let mu = 10f64.powf(cfg.pasture_db[0] / 10.0);
    let vals: Vec<f64> = scene
        .stack
        .channel(0)
        .iter()
        .zip(&scene.cover)
        .filter(|(_, &c)| c == Cover::Pasture)
        .map(|(&v, _)| 10f64.powf(f64::from(v) / 10.0))
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let se = mu / (cfg.looks * vals.len() as f64).sqrt();
    assert!((mean - mu).abs() < 3.0 * se, "mean {mean} vs {mu} (se {se})");
}

#[test]
fn provenance_record_reports_fractions_and_round_trips() {
    let cfg = config(8);
    let scene = generate(&cfg).unwrap();
    let record = describe(&cfg, &scene);
    let realized: f64 = record.require("realized.deforestation_fraction").unwrap();
    assert!((realized / cfg.deforestation_fraction - 1.0).abs() <= 0.2, "{realized}");
    let reparsed = KvMap::parse(&record.to_string()).unwrap();
    assert_eq!(reparsed, record);
    let back = SceneConfig::default().with_kv(&reparsed.section("config")).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(record.get_str("config.forest_db"), Some("-7,-12"));
    assert_eq!(record.get_str("config.drop_db"), Some("3"));
    assert_eq!(record.get_str("config.looks"), Some("4"));
    assert!(record.contains("stats.forest.c0.mean"));
}

#[test]
fn infeasible_configurations_are_rejected() {
    let bad = [
        SceneConfig {
            forest_fraction: 0.95,
            past_fraction: 0.1,
            ..Default::default()
        },
        SceneConfig {
            deforestation_fraction: 0.7,
            ..Default::default()
        },
        SceneConfig {
            timesteps: 1,
            ..Default::default()
        },
        SceneConfig {
            looks: 0.5,
            ..Default::default()
        },
    ];
    for cfg in bad {
        assert!(generate(&cfg).is_err(), "{cfg:?}");
    }
}
