use geomap::classifiers::ClassifierKind;
use geomap::dr::DrKind;
use geomap::experiments::{
    emit_report, run_classifier_table, run_dimension_sweep, run_dr_sweep, run_neighbor_sweep, run_train_size_sweep,
    DatasetSource, ExperimentConfig, Space, SyntheticSpec, CELLS_HEADER,
};

fn small(per_class: usize, dim: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DatasetSource::Synthetic(SyntheticSpec {
        per_class,
        dim,
        ..SyntheticSpec::default()
    }));
    cfg.trials = 2;
    cfg.split.train_per_class = 10;
    cfg.gam.restarts = 1;
    cfg
}

/// cells.csv without the four wall-clock columns.
fn untimed(cells: &str) -> String {
    cells
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            f[..f.len() - 4].join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn reruns_are_identical() {
    let mut cfg = small(30, 10);
    cfg.classifiers = vec![ClassifierKind::Knn(1), ClassifierKind::LinearSvm];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        emit_report(&run_classifier_table(&cfg).unwrap(), d.path()).unwrap();
    }
    let read = |i: usize, name: &str| std::fs::read_to_string(dirs[i].path().join(name)).unwrap();
    assert_eq!(read(0, "summary.csv"), read(1, "summary.csv"));
    assert_eq!(read(0, "config.echo"), read(1, "config.echo"));
    assert_eq!(untimed(&read(0, "cells.csv")), untimed(&read(1, "cells.csv")));
    assert!(read(0, "cells.csv").starts_with(CELLS_HEADER));
}

#[test]
fn config_echo_parses_back_to_the_resolved_config() {
    let cfg = small(30, 10);
    let report = run_classifier_table(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let echo = std::fs::read_to_string(dir.path().join("config.echo")).unwrap();
    let back = ExperimentConfig::from_toml(&echo).unwrap();
    assert_eq!(Some(back.clone()), report.config);
    assert_eq!(back.gam.target_dim, Some(9));
}

#[test]
fn neighbor_grid_gives_one_row_per_value_and_space() {
    let mut cfg = small(12, 10);
    cfg.trials = 1;
    cfg.sweeps.neighbors = vec![3, 11];
    let report = run_neighbor_sweep(&cfg).unwrap();
    for v in [3, 11] {
        let rows: Vec<_> = report.cells.iter().filter(|c| c.neighbors == v).collect();
        // the original space does not depend on v, but it is reported beside each mapped row
        assert_eq!(rows.iter().filter(|c| c.space == Space::Original).count(), 1);
        assert_eq!(rows.iter().filter(|c| c.space == Space::Mapped).count(), 1);
    }
    let wide = report.cells.iter().find(|c| c.neighbors == 11 && c.space == Space::Mapped).unwrap();
    assert!(wide.flags.iter().any(|f| f == "neighbors_truncated"));
    let narrow = report.cells.iter().find(|c| c.neighbors == 3 && c.space == Space::Mapped).unwrap();
    assert!(!narrow.flags.iter().any(|f| f == "neighbors_truncated"));
}

#[test]
fn single_dimension_sweep_has_one_row() {
    let mut cfg = small(30, 10);
    cfg.sweeps.mapped_dims = vec![4];
    let report = run_dimension_sweep(&cfg).unwrap();
    assert_eq!(report.dimension_rows.len(), 1);
    let row = &report.dimension_rows[0];
    assert_eq!(row.m, 4);
    assert!(row.relative_gap().abs() <= 1e-6);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("dimension_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn pca_sweep_scores_both_spaces_per_trial() {
    let mut cfg = small(40, 30);
    cfg.dr.methods = vec![DrKind::Pca];
    cfg.dr.dims = vec![20];
    cfg.classifiers = vec![ClassifierKind::LinearSvm];
    let report = run_dr_sweep(&cfg).unwrap();
    for trial in 0..2 {
        let cells: Vec<_> = report.cells.iter().filter(|c| c.trial == trial).collect();
        assert_eq!(cells.len(), 2);
        assert!(cells.iter().any(|c| c.space == Space::Original));
        assert!(cells.iter().any(|c| c.space == Space::Mapped));
        assert!(cells.iter().all(|c| c.is_ok() && c.dim == 20 && (0.0..=1.0).contains(&c.oa)));
    }
}

#[test]
fn train_sweep_covers_each_size() {
    let mut cfg = small(30, 10);
    cfg.trials = 1;
    cfg.classifiers = vec![ClassifierKind::Knn(1)];
    cfg.sweeps.train_sizes = vec![5, 10];
    let report = run_train_size_sweep(&cfg).unwrap();
    for k in [5, 10] {
        assert_eq!(report.cells.iter().filter(|c| c.train_per_class == k && c.is_ok()).count(), 2);
    }
}

#[test]
fn mapping_helps_nearest_neighbor_in_most_trials() {
    let mut cfg = ExperimentConfig::new(DatasetSource::Synthetic(SyntheticSpec::default()));
    cfg.classifiers = vec![ClassifierKind::Knn(1)];
    let report = run_classifier_table(&cfg).unwrap();
    let oa = |space: Space, t: usize| {
        report.cells.iter().find(|c| c.space == space && c.trial == t).unwrap().oa
    };
    let wins = (0..10).filter(|&t| oa(Space::Mapped, t) >= oa(Space::Original, t)).count();
    assert!(wins >= 8, "mapped 1nn won {wins}/10 trials");
}
