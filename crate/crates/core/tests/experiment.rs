mod common;

use std::collections::BTreeSet;
use std::fs;

use fairprune::experiment::{
    debiased_test_set, emit_reports, emit_summary, picks, read_records_csv, run_grid,
    run_grid_on, ExperimentResult, GridSpec, Summary, Technique,
};
use fairprune::{Error, RowId, SplitSpec};

fn toy_spec() -> GridSpec {
    GridSpec {
        hidden1: vec![16],
        hidden2: vec![8],
        permutation_seeds: vec![0, 1],
        workers: 1,
        ..GridSpec::default()
    }
}

#[test]
fn toy_grid_structure() {
    let d = common::loan();
    let result = run_grid_on(&toy_spec(), &d).unwrap();
    assert!(result.failures.is_empty(), "{:?}", result.failures);
    for t in Technique::ALL {
        assert_eq!(result.records_for(t).count(), 2);
    }
    for r in &result.records {
        assert!((0.0..=1.0).contains(&r.individual_discrimination));
        assert!((0.0..=1.0).contains(&r.accuracy));
    }
    // every technique of a config sees the same test rows
    for c in 0..2 {
        let rows: BTreeSet<usize> = result
            .records
            .iter()
            .filter(|r| r.config.index == c)
            .map(|r| r.test_rows)
            .collect();
        assert_eq!(rows.len(), 1);
    }
    for r in result.records_for(Technique::Sr) {
        assert_eq!(r.individual_discrimination, 0.0);
    }
}

#[test]
fn debiased_test_filtering() {
    let d = common::noisy_table(20, 0.6, 2);
    let (_, test) = d.split(&SplitSpec::new(0)).unwrap();
    assert_eq!(test.len(), 4);
    let outside: BTreeSet<RowId> = d
        .row_ids()
        .iter()
        .filter(|id| !test.row_ids().contains(id))
        .copied()
        .collect();
    assert_eq!(debiased_test_set(&test, &outside).unwrap().row_ids(), test.row_ids());

    let two: BTreeSet<RowId> = test.row_ids()[..2].iter().copied().collect();
    let filtered = debiased_test_set(&test, &two).unwrap();
    assert_eq!(filtered.len(), 2);
    assert!(filtered.row_ids().iter().all(|id| test.row_ids().contains(id) && !two.contains(id)));

    let all: BTreeSet<RowId> = test.row_ids().iter().copied().collect();
    assert!(matches!(debiased_test_set(&test, &all), Err(Error::EmptyAfterFilter)));
}

#[test]
fn reports_are_consistent_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("loan.csv");
    let schema = dir.path().join("loan.schema.json");
    fs::copy(common::fixture("loan.csv"), &data).unwrap();
    fs::copy(common::fixture("loan.schema.json"), &schema).unwrap();
    let spec = GridSpec {
        dataset: Some(data),
        schema: Some(schema),
        ..toy_spec()
    };

    let a = run_grid(&spec).unwrap();
    let b = run_grid(&spec).unwrap();
    let files_a = emit_reports(&a, dir.path().join("a")).unwrap();
    let files_b = emit_reports(&b, dir.path().join("b")).unwrap();
    for (x, y) in [
        (&files_a.configs_csv, &files_b.configs_csv),
        (&files_a.summary_json, &files_b.summary_json),
        (&files_a.boxplot_csv, &files_b.boxplot_csv),
    ] {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }

    let records = read_records_csv(fs::File::open(&files_a.configs_csv).unwrap()).unwrap();
    assert_eq!(records, a.records);
    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(&files_a.summary_json).unwrap()).unwrap();
    assert_eq!(summary.picks, picks(&records).unwrap());
    assert_eq!(summary.configs, 2);

    let boxes = fs::read_to_string(&files_a.boxplot_csv).unwrap();
    let lines: Vec<&str> = boxes.lines().collect();
    assert_eq!(lines[0], "technique,metric,count,min,q1,median,q3,max");
    assert!(lines.len() >= 1 + 3 * 2);

    // re-reporting from the stored per-config file reproduces the summary
    let again = dir.path().join("again");
    emit_summary(&records, &a.failures, a.unfair_points.len(), &again).unwrap();
    assert_eq!(
        fs::read(again.join("summary.json")).unwrap(),
        fs::read(&files_a.summary_json).unwrap()
    );
}

#[test]
fn empty_result_is_rejected() {
    let empty = ExperimentResult {
        records: Vec::new(),
        failures: Vec::new(),
        unfair_points: Vec::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(emit_reports(&empty, dir.path()), Err(Error::EmptyResult)));
}

#[test]
fn grid_needs_paths() {
    assert!(matches!(run_grid(&toy_spec()), Err(Error::InvalidConfig(_))));
}
