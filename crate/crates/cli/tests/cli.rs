use std::path::Path;
use std::process::{Command, Output};

use geomap::data::{load_csv, load_hsb, save_csv};
use geomap::experiments::SyntheticSpec;

fn geomap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomap"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn write_data(dir: &Path) -> String {
    let ds = SyntheticSpec {
        per_class: 20,
        ..SyntheticSpec::default()
    }
    .generate()
    .unwrap();
    let path = dir.join("train.csv");
    save_csv(&ds, &path).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "trials = 3\nno_such_key = 1\n").unwrap();
    let o = geomap(&["experiment", "table2", "--config", "bad.toml"], dir.path());
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let o = geomap(&["experiment", "table2", "--bogus-flag"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_or_malformed_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = geomap(&["gam", "fit", "--data", "absent.csv"], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(dir.path().join("broken.csv"), "1.0,2.0,x\n3.0,4.0,1\n").unwrap();
    let o = geomap(&["gam", "fit", "--data", "broken.csv"], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_then_transform() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = geomap(
        &["gam", "fit", "--data", &data, "--dim", "4", "--restarts", "1", "--affinity-out", "a.mtx", "--out", "run", "-v"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mtx = std::fs::read_to_string(dir.path().join("a.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate"));
    let iters = std::fs::read_to_string(dir.path().join("run/iterations.csv")).unwrap();
    assert!(iters.lines().count() >= 2);
    assert!(dir.path().join("run/model.gam").exists());

    let o = geomap(
        &["gam", "transform", "--model", "run/model.gam", "--data", &data, "--output", "mapped.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mapped = load_csv(dir.path().join("mapped.csv")).unwrap();
    let original = load_csv(&data).unwrap();
    assert_eq!(mapped.dim(), 4);
    assert_eq!(mapped.labels(), original.labels());

    // mismatched dimension is a data error
    let o = geomap(
        &["gam", "transform", "--model", "run/model.gam", "--data", "mapped.csv", "--output", "again.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn dataset_convert_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    assert!(geomap(&["dataset", "convert", &data, "cube.hsb"], dir.path()).status.success());
    assert!(geomap(&["dataset", "convert", "cube.hsb", "back.csv"], dir.path()).status.success());
    let original = load_csv(&data).unwrap();
    let cube = load_hsb(dir.path().join("cube.hsb")).unwrap();
    let back = load_csv(dir.path().join("back.csv")).unwrap();
    assert_eq!(cube.features(), original.features());
    assert_eq!(back.features(), original.features());
    assert_eq!(back.label_map(), original.label_map());
}

#[test]
fn table2_writes_its_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = geomap(
        &["experiment", "table2", "--data", &data, "--trials", "2", "--train-per-class", "5", "--restarts", "1", "--seed", "3", "--out", "t2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["cells.csv", "summary.csv", "config.echo", "run.log"] {
        assert!(dir.path().join("t2").join(f).exists(), "{f}");
    }
    let cells = std::fs::read_to_string(dir.path().join("t2/cells.csv")).unwrap();
    // 7 classifiers, 2 spaces, 2 trials
    assert_eq!(cells.lines().count(), 1 + 7 * 2 * 2);
    let echo = std::fs::read_to_string(dir.path().join("t2/config.echo")).unwrap();
    let cfg = geomap::experiments::ExperimentConfig::from_toml(&echo).unwrap();
    assert_eq!((cfg.split.seed, cfg.gam.seed, cfg.trials), (3, 3, 2));
}
