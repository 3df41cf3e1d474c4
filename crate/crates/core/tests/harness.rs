use std::path::Path;

use ppopt_core::envsim::EnvKind;
use ppopt_core::harness::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn parse(text: &str) -> Result<ExperimentConfig, HarnessError> {
    ExperimentConfig::from_json(text, Path::new("test.json"))
}

fn record(algo: Algo, seed: u64, returns: Vec<f64>) -> RunRecord {
    let cum_time_ms: Vec<f64> = (1..=returns.len()).map(|i| i as f64 * 1.5).collect();
    RunRecord { algo, seed, total_ms: cum_time_ms.last().copied().unwrap_or(0.0), returns, cum_time_ms, config_hash: "h".into() }
}

fn tiny(algo: Algo, seeds: Vec<u64>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(algo, EnvKind::InvertedPendulum);
    c.seeds = seeds;
    c.n_train = 3;
    c.n_pre = 2;
    c.ppo.steps_per_iteration = 64;
    c.ppopt.pretrain.steps_per_iteration = 64;
    c.ppopt.train.steps_per_iteration = 64;
    c.dyna.batch_size = 8;
    c.dyna.model_hidden = vec![8];
    c.dyna.rollout_starts = 4;
    if algo == Algo::Ppopt {
        c.pre_env = Some(EnvKind::InvertedPendulum);
    }
    c
}

#[test]
fn minimal_config_gets_defaults() {
    let c = parse(r#"{"algo": "ppo", "env": "double_pendulum"}"#).unwrap();
    assert_eq!(c, ExperimentConfig::new(Algo::Ppo, EnvKind::DoublePendulum));
    assert_eq!(c.seeds, vec![1, 2, 3, 4, 5]);
    assert_eq!((c.n_pre, c.n_train), (600, 200));
    assert_eq!(c.ppopt_hyper().train_episodes, 200);
    assert_eq!(c.dyna_config().episodes, 200);
}

#[test]
fn ppopt_requires_pre_env() {
    let err = parse(r#"{"algo": "ppopt", "env": "hopper_lite"}"#).unwrap_err();
    assert!(matches!(err, HarnessError::Invalid(ref m) if m.contains("pre_env")), "{err}");
    assert!(parse(r#"{"algo": "ppopt", "env": "hopper_lite", "pre_env": "inverted_pendulum"}"#).is_ok());
}

#[test]
fn unknown_key_reports_line_and_field() {
    let err = parse("{\n  \"algo\": \"ppo\",\n  \"env\": \"double_pendulum\",\n  \"sedes\": [1]\n}").unwrap_err();
    let HarnessError::Parse { line, message, .. } = &err else { panic!("{err}") };
    assert_eq!(*line, 4);
    assert!(message.contains("sedes"), "{message}");
    assert!(err.to_string().starts_with("test.json:4:"), "{err}");
}

#[test]
fn nested_unknown_key_is_rejected() {
    let err = parse(r#"{"algo": "ppo", "env": "double_pendulum", "ppo": {"clip": 0.1}}"#).unwrap_err();
    assert!(matches!(err, HarnessError::Parse { ref message, .. } if message.contains("clip")), "{err}");
}

#[test]
fn missing_field_and_type_errors() {
    let err = parse(r#"{"env": "double_pendulum"}"#).unwrap_err();
    assert!(matches!(err, HarnessError::Parse { ref message, .. } if message.contains("algo")), "{err}");
    let err = parse("{\"algo\": \"ppo\",\n\"env\": \"double_pendulum\",\n\"n_train\": \"many\"}").unwrap_err();
    assert!(matches!(err, HarnessError::Parse { line: 3, .. }), "{err}");
    assert!(parse(r#"{"algo": "sac", "env": "double_pendulum"}"#).is_err());
}

#[test]
fn seeds_must_be_distinct_and_nonempty() {
    assert!(parse(r#"{"algo": "ppo", "env": "double_pendulum", "seeds": []}"#).is_err());
    assert!(parse(r#"{"algo": "ppo", "env": "double_pendulum", "seeds": [1, 2, 1]}"#).is_err());
}

#[test]
fn effective_config_round_trips() {
    let mut c = ExperimentConfig::new(Algo::Ppopt, EnvKind::HopperLite);
    c.pre_env = Some(EnvKind::InvertedPendulum);
    c.ppopt.core_lr = 1e-5;
    c.n_train = 17;
    let back = parse(&c.to_json()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
}

#[test]
fn hash_detects_changes() {
    let a = ExperimentConfig::new(Algo::Ppo, EnvKind::DoublePendulum);
    let mut b = a.clone();
    b.ppo.clip_epsilon = 0.1;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn one_seed_gives_one_record_with_matching_hash() {
    let c = tiny(Algo::Ppo, vec![7]);
    let out = run_experiment_with(&c, 1, None).unwrap();
    assert_eq!(out.records.len(), 1);
    assert!(out.failures.is_empty());
    let r = &out.records[0];
    assert_eq!((r.seed, r.returns.len()), (7, 3));
    assert_eq!(r.config_hash, c.hash());
    assert_eq!(r.total_ms, *r.cum_time_ms.last().unwrap());
    r.validate().unwrap();
}

#[test]
fn repeated_experiment_is_bit_identical() {
    for algo in [Algo::Ppo, Algo::Ppopt, Algo::DynaDdpg] {
        let c = tiny(algo, vec![1, 2]);
        let a = run_experiment_with(&c, 1, None).unwrap();
        let b = run_experiment_with(&c, 1, None).unwrap();
        let bits = |o: &ExperimentOutcome| -> Vec<Vec<u64>> { o.records.iter().map(|r| r.returns.iter().map(|v| v.to_bits()).collect()).collect() };
        assert_eq!(bits(&a), bits(&b), "{algo}");
    }
}

#[test]
fn parallel_and_serial_runs_agree() {
    let c = tiny(Algo::Ppo, vec![1, 2, 3, 4, 5]);
    let serial = run_experiment_with(&c, 1, None).unwrap();
    let parallel = run_experiment_with(&c, 5, None).unwrap();
    let seeds: Vec<u64> = parallel.records.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![1, 2, 3, 4, 5]);
    for (s, p) in serial.records.iter().zip(&parallel.records) {
        assert_eq!(s.returns, p.returns);
    }
}

#[test]
fn seed_result_is_independent_of_companions() {
    let alone = run_experiment_with(&tiny(Algo::Ppo, vec![3]), 1, None).unwrap();
    let crowd = run_experiment_with(&tiny(Algo::Ppo, vec![5, 3, 1]), 3, None).unwrap();
    assert_eq!(crowd.records[1].seed, 3);
    assert_eq!(alone.records[0].returns, crowd.records[1].returns);
}

#[test]
fn records_are_persisted_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny(Algo::Ppo, vec![4, 9]);
    let out = run_experiment_with(&c, 2, Some(dir.path())).unwrap();
    for r in &out.records {
        let text = std::fs::read_to_string(record_path(dir.path(), r.seed)).unwrap();
        let back: RunRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, r);
    }
    let eff = load_config(&dir.path().join("effective_config.json")).unwrap();
    assert_eq!(eff, c);
}

#[test]
fn unreadable_core_fails_before_runs() {
    let mut c = tiny(Algo::Ppopt, vec![1]);
    c.pretrained = Some("/nonexistent/core.pptw".into());
    assert!(matches!(run_experiment_with(&c, 1, None), Err(HarnessError::Run(_))));
}

#[test]
fn threads_env_default_is_seed_count() {
    // PPOPT_THREADS is not set by the test runner.
    if std::env::var_os("PPOPT_THREADS").is_none() {
        assert_eq!(thread_count_from_env(5), 5);
    }
}

#[test]
fn record_validation() {
    let mut r = record(Algo::Ppo, 1, vec![1.0, 2.0]);
    r.validate().unwrap();
    r.cum_time_ms = vec![2.0, 1.0];
    assert!(r.validate().is_err());
    let mut r = record(Algo::Ppo, 1, vec![1.0, f64::NAN]);
    assert!(r.validate().is_err());
    r.returns.pop();
    assert!(r.validate().is_err());
}

#[test]
fn singleton_aggregate_is_the_record() {
    let a = aggregate(&[record(Algo::Ppo, 1, vec![3.0, -1.0, 4.0])]).unwrap();
    assert_eq!(a.mean, vec![3.0, -1.0, 4.0]);
    assert_eq!(a.min, a.mean);
    assert_eq!(a.max, a.mean);
    assert_eq!(a.n_runs, 1);
}

#[test]
fn two_record_aggregate_by_hand() {
    let a = aggregate(&[record(Algo::Ppo, 1, vec![1.0, 3.0]), record(Algo::Ppo, 2, vec![3.0, 1.0])]).unwrap();
    assert_eq!((a.mean, a.min, a.max), (vec![2.0, 2.0], vec![1.0, 1.0], vec![3.0, 3.0]));
    assert_eq!(a.mean_total_seconds, 3e-3);
}

#[test]
fn five_random_records_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let records: Vec<RunRecord> =
        (0..5).map(|s| record(Algo::Ppopt, s, (0..40).map(|_| rng.random_range(-100.0..1000.0)).collect())).collect();
    let a = aggregate(&records).unwrap();
    for i in 0..40 {
        let col: Vec<f64> = records.iter().map(|r| r.returns[i]).collect();
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let mean = (col[0] + col[1] + col[2] + col[3] + col[4]) / 5.0;
        assert!((a.mean[i] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        assert_eq!((a.min[i], a.max[i]), (sorted[0], sorted[4]));
    }
}

#[test]
fn unequal_lengths_truncate() {
    let a = aggregate(&[record(Algo::Ppo, 1, vec![1.0, 2.0, 3.0]), record(Algo::Ppo, 2, vec![5.0])]).unwrap();
    assert_eq!(a.mean, vec![3.0]);
}

#[test]
fn aggregate_errors() {
    assert!(matches!(aggregate(&[]), Err(HarnessError::NoRecords)));
    assert!(aggregate(&[record(Algo::Ppo, 1, vec![1.0]), record(Algo::Ppopt, 2, vec![1.0])]).is_err());
}

proptest! {
    #[test]
    fn aggregate_bounds_hold(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 12), 1..8)) {
        let records: Vec<RunRecord> = rows.into_iter().enumerate().map(|(s, r)| record(Algo::Ppo, s as u64, r)).collect();
        let a = aggregate(&records).unwrap();
        for i in 0..12 {
            prop_assert!(a.min[i] <= a.mean[i] && a.mean[i] <= a.max[i]);
        }
    }

    #[test]
    fn clipping_never_lowers_or_touches_high_values(v in prop::collection::vec(-100.0f64..100.0, 0..30)) {
        let c = clip_rewards_for_plot(&v, -10.0);
        for (a, b) in v.iter().zip(&c) {
            prop_assert!(*b >= -10.0);
            if *a >= -10.0 { prop_assert_eq!(a, b); }
        }
    }
}

#[test]
fn clipping_examples() {
    assert_eq!(clip_rewards_for_plot(&[-50.0, 5.0], -10.0), vec![-10.0, 5.0]);
    assert_eq!(clip_rewards_for_plot(&[-3.0, 5.0], -10.0), vec![-3.0, 5.0]);
    assert_eq!(clip_rewards_for_plot(&[-1e300, 5.0], f64::NEG_INFINITY), vec![-1e300, 5.0]);
}

#[test]
fn csv_reload_reconstructs_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let records: Vec<RunRecord> = (1..=5)
        .map(|s| {
            let mut r = record(Algo::DynaDdpg, s, (0..25).map(|_| rng.random_range(-1e3..1e3) / 3.0).collect());
            r.cum_time_ms.iter_mut().for_each(|t| *t /= 7.0);
            r.total_ms = *r.cum_time_ms.last().unwrap();
            r
        })
        .collect();
    let agg = aggregate(&records).unwrap();
    let path = dir.path().join("results.csv");
    emit_csv(&records, &agg, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("algo,seed,episode,return,cum_time_ms\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 5 * 25);
    let back = read_results_csv(&path).unwrap();
    assert_eq!(aggregate(&back).unwrap(), agg);
    for (a, b) in back.iter().zip(&records) {
        assert_eq!((a.seed, &a.returns, &a.cum_time_ms), (b.seed, &b.returns, &b.cum_time_ms));
    }
    let agg_text = std::fs::read_to_string(aggregate_path(&path)).unwrap();
    assert!(agg_text.starts_with("algo,episode,mean,min,max\n"));
}

#[test]
fn empty_records_create_no_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let agg = aggregate(&[record(Algo::Ppo, 1, vec![1.0])]).unwrap();
    assert!(matches!(emit_csv(&[], &agg, &path), Err(HarnessError::NoRecords)));
    assert!(!path.exists());
}

#[test]
fn two_algorithm_plot_structure() {
    let dir = tempfile::tempdir().unwrap();
    let ppo = vec![record(Algo::Ppo, 1, vec![-50.0, 1.0, 2.0]), record(Algo::Ppo, 2, vec![0.0, 3.0, 5.0])];
    let ppopt = vec![record(Algo::Ppopt, 1, vec![1.0, 4.0, 9.0])];
    let aggs = vec![aggregate(&ppo).unwrap(), aggregate(&ppopt).unwrap()];
    let before = ppo.clone();
    let path = dir.path().join("plot.svg");
    emit_plot(&aggs, &path, DEFAULT_CLIP_FLOOR).unwrap();
    assert_eq!(ppo, before);
    let svg = std::fs::read_to_string(&path).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let count = |tag: &str| doc.descendants().filter(|n| n.has_tag_name(tag)).count();
    assert_eq!(count("polyline"), 2);
    assert_eq!(count("polygon"), 2);
    let texts: Vec<&str> = doc.descendants().filter(|n| n.has_tag_name("text")).filter_map(|n| n.text()).collect();
    for label in ["episode", "episode return", "ppo", "ppopt"] {
        assert!(texts.contains(&label), "missing {label}");
    }
    assert_eq!(doc.root_element().attribute("version"), Some("1.1"));
    let timing = std::fs::read_to_string(timing_path(&path)).unwrap();
    let lines: Vec<&str> = timing.lines().collect();
    assert_eq!(lines[0], "algo,mean_total_seconds");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("ppo,"));
}

#[test]
fn empty_plot_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plot.svg");
    assert!(emit_plot(&[], &path, DEFAULT_CLIP_FLOOR).is_err());
    assert!(!path.exists());
}
