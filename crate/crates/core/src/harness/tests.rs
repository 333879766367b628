use super::*;
use crate::dataset::synthesize_records;
use crate::ppo::{CorrelationSnapshot, TrainLog};
use crate::synth::canonical_conditions;

fn tiny_spec() -> BenchmarkSpec {
    BenchmarkSpec {
        condition_tags: vec!["1kg".into(), "2kg".into()],
        repetitions: 2,
        seed: 3,
        eval_trees: 10,
        dataset: DatasetConfig {
            duration_s: 12.0,
            ..Default::default()
        },
        env: EnvConfig {
            oracle_trees: 5,
            ..Default::default()
        },
        ppo: PpoConfig {
            episodes: 16,
            hidden: [8, 8],
            ..Default::default()
        },
        baselines: BaselineConfig {
            n_trees: 10,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn records(spec: &BenchmarkSpec) -> BTreeMap<String, Vec<SignalRecord>> {
    canonical_conditions()
        .into_iter()
        .filter(|c| spec.condition_tags.contains(&c.tag))
        .map(|c| {
            let recs = synthesize_records(std::slice::from_ref(&c), &spec.dataset, spec.seed).unwrap();
            (c.tag.clone(), recs)
        })
        .collect()
}

#[test]
fn report_grid_matches_the_spec() {
    let spec = tiny_spec();
    let run = run_condition_benchmark(&spec, &records(&spec)).unwrap();
    let r = &run.report;
    assert_eq!(r.cells.len(), 2 * 4);
    assert_eq!(r.noise_curves.len(), 2 * 4);
    assert_eq!(r.per_label.len(), 2 * 3 * 4);
    assert_eq!(r.margins.len(), 2);
    assert_eq!(r.stability_refs.len(), 4);
    assert_eq!(run.logs.len(), 4);
    for c in &r.cells {
        assert_eq!(c.macro_f1.len(), 2);
        assert!((0.0..=1.0).contains(&c.macro_f1_mean));
    }
    for combo in 0..2 {
        for m in Method::ALL {
            assert!(r.cell(combo, m).is_some());
        }
    }
}

#[test]
fn single_method_single_condition_is_one_cell() {
    let spec = BenchmarkSpec {
        condition_tags: vec!["1kg".into()],
        methods: vec![Method::Skb],
        repetitions: 1,
        ..tiny_spec()
    };
    let run = run_condition_benchmark(&spec, &records(&spec)).unwrap();
    assert_eq!(run.report.cells.len(), 1);
    assert!(run.report.margins.is_empty() && run.logs.is_empty());
}

#[test]
fn reports_are_reproducible() {
    let spec = tiny_spec();
    let recs = records(&spec);
    let a = run_condition_benchmark(&spec, &recs).unwrap().report;
    let b = run_condition_benchmark(&spec, &recs).unwrap().report;
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn zero_density_matches_clean_accuracy() {
    let spec = tiny_spec();
    let run = run_condition_benchmark(&spec, &records(&spec)).unwrap();
    for cell in &run.cells {
        for e in &cell.evaluations {
            assert_eq!(e.noise_accuracy[0], e.metrics.accuracy);
            assert_eq!(e.noise_accuracy.len(), 4);
        }
    }
}

#[test]
fn matched_baselines_use_the_ppo_cardinality() {
    let spec = tiny_spec();
    let recs = records(&spec);
    let cell = CellId {
        combo: 0,
        repetition: 0,
    };
    let b = build_cell(&spec, &recs, cell).unwrap();
    let sel = select_cell(&spec, cell, &b.train, Some(&[1, 4, 7])).unwrap();
    assert_eq!(sel.len(), 4);
    assert!(sel.iter().all(|s| s.subset.len() == 3));
    let fixed = BenchmarkSpec {
        baselines: BaselineConfig {
            k_mode: KMode::Fixed,
            k: 5,
            ..spec.baselines.clone()
        },
        ..spec.clone()
    };
    let sel = select_cell(&fixed, cell, &b.train, Some(&[1, 4, 7])).unwrap();
    assert_eq!(
        sel.iter().map(|s| s.subset.len()).collect::<Vec<_>>(),
        vec![5, 5, 5, 3]
    );
    assert_eq!(baseline_k(&spec, Some(&[])), 6);
}

#[test]
fn missing_condition_names_the_tag() {
    let spec = tiny_spec();
    let mut recs = records(&spec);
    recs.remove("2kg");
    let err = run_condition_benchmark(&spec, &recs).unwrap_err();
    assert!(matches!(&err, Error::MissingCondition(t) if t == "2kg"), "{err}");
}

#[test]
fn spec_validation() {
    let bad = BenchmarkSpec {
        repetitions: 0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let bad = BenchmarkSpec {
        noise_densities: vec![0.0, 0.6],
        ..Default::default()
    };
    assert!(bad.validate().unwrap_err().to_string().contains("0.6"));
    assert!(BenchmarkSpec::default().validate().is_ok());
}

#[test]
fn combos_are_prefixes_and_cells_are_combo_major() {
    let spec = tiny_spec();
    assert_eq!(
        spec.combos(),
        vec![vec!["1kg".to_string()], vec!["1kg".into(), "2kg".into()]]
    );
    let cells = spec.cells();
    assert_eq!(
        cells[1],
        CellId {
            combo: 0,
            repetition: 1
        }
    );
    assert_eq!(
        cells[2],
        CellId {
            combo: 1,
            repetition: 0
        }
    );
    assert_eq!(cells[3].key(), "combo1_rep1");
}

fn perfect(counts: [usize; 3]) -> MetricsReport {
    let mut c = [[0; 3]; 3];
    for i in 0..3 {
        c[i][i] = counts[i];
    }
    MetricsReport::from_confusion(c)
}

#[test]
fn perfect_predictions_score_one_per_label() {
    let rows = per_label_report(0, &[(Method::Ppo, vec![perfect([4, 5, 6]), perfect([3, 3, 3])])]);
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(r.fscore_mean, Some(1.0));
        assert_eq!(r.fscore_variance, Some(0.0));
        assert!(!r.undefined);
    }
}

#[test]
fn absent_label_is_undefined_not_zero() {
    let rows = per_label_report(0, &[(Method::Skb, vec![perfect([4, 5, 0])])]);
    let hazard = rows
        .iter()
        .find(|r| r.label == AdhesionLabel::HazardOccurred)
        .unwrap();
    assert!(hazard.undefined);
    assert_eq!(hazard.fscore_mean, None);
    let safe = rows.iter().find(|r| r.label == AdhesionLabel::Safe).unwrap();
    assert_eq!(safe.fscore_mean, Some(1.0));
}

#[test]
fn per_label_variance_is_across_repetitions() {
    let mut half = [[0; 3]; 3];
    half[0][0] = 1;
    half[0][1] = 1;
    half[1][1] = 2;
    half[2][2] = 2;
    let rows = per_label_report(
        0,
        &[(
            Method::Rfe,
            vec![perfect([2, 2, 2]), MetricsReport::from_confusion(half)],
        )],
    );
    let safe = rows.iter().find(|r| r.label == AdhesionLabel::Safe).unwrap();
    // F-scores 1 and 2/3: mean 5/6, sample variance (1/6)^2 * 2.
    assert!((safe.fscore_mean.unwrap() - 5.0 / 6.0).abs() < 1e-12);
    assert!((safe.fscore_variance.unwrap() - 2.0 / 36.0).abs() < 1e-12);
}

fn synthetic_log(episodes: usize) -> TrainLog {
    let subsets: Vec<Vec<usize>> = (0..episodes).map(|i| (0..1 + i % 4).collect()).collect();
    TrainLog {
        episode_rewards: vec![0.0; episodes],
        feature_counts: subsets.iter().map(Vec::len).collect(),
        jaccard: (1..episodes).map(|_| 0.5).collect(),
        final_subsets: subsets,
        snapshot_every: 5,
        correlation_snapshots: vec![CorrelationSnapshot {
            episode: 3,
            subset: vec![0, 2],
            matrix: vec![vec![1.0, 0.3], vec![0.3, 1.0]],
        }],
        ..Default::default()
    }
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn two_thousand_episodes_give_forty_slices() {
    let dir = tempfile::tempdir().unwrap();
    let files = export_stability(&synthetic_log(2000), dir.path()).unwrap();
    let slices = csv_rows(&files[1]);
    assert_eq!(slices.len(), 40);
    assert!(slices.iter().all(|r| &r[4] == "false"));
    assert_eq!(csv_rows(&files[0]).len(), 2000);
    assert_eq!(csv_rows(&files[2]).len(), 1999);
    assert_eq!(csv_rows(&files[3]).len(), 4);
}

#[test]
fn long_run_reports_the_partial_slice_separately() {
    let n = PpoConfig::LONG_RUN_EPISODES;
    let dir = tempfile::tempdir().unwrap();
    let files = export_stability(&synthetic_log(n), dir.path()).unwrap();
    let slices = csv_rows(&files[1]);
    let full = slices.iter().filter(|r| &r[4] == "false").count();
    assert_eq!(full, n / SLICE_WIDTH);
    let last = slices.last().unwrap();
    assert_eq!(&last[4], "true");
    assert_eq!(last[2].parse::<usize>().unwrap(), n % SLICE_WIDTH);
}

#[test]
fn trained_snapshots_are_symmetric_with_unit_diagonal() {
    let spec = BenchmarkSpec {
        condition_tags: vec!["1kg".into()],
        repetitions: 1,
        ..tiny_spec()
    };
    let run = run_condition_benchmark(&spec, &records(&spec)).unwrap();
    let log = &run.logs[0].1;
    assert!(!log.correlation_snapshots.is_empty());
    for s in &log.correlation_snapshots {
        for i in 0..s.subset.len() {
            assert_eq!(s.matrix[i][i], 1.0);
            for j in 0..s.subset.len() {
                assert!((s.matrix[i][j] - s.matrix[j][i]).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn report_json_round_trips_and_csv_mirrors_exist() {
    let spec = BenchmarkSpec {
        condition_tags: vec!["1kg".into()],
        repetitions: 1,
        ..tiny_spec()
    };
    let r = run_condition_benchmark(&spec, &records(&spec)).unwrap().report;
    let json = r.to_json().unwrap();
    for key in [
        "\"cells\"",
        "\"per_label\"",
        "\"noise_curves\"",
        "\"stability_refs\"",
    ] {
        assert!(json.contains(key));
    }
    assert_eq!(SelectionReport::from_json(&json).unwrap(), r);
    assert!(matches!(SelectionReport::from_json("{"), Err(Error::Schema(_))));
    let dir = tempfile::tempdir().unwrap();
    let files = r.write_csv(dir.path()).unwrap();
    assert_eq!(csv_rows(&files[0]).len(), 4);
    assert_eq!(csv_rows(&files[2]).len(), 16);
}
