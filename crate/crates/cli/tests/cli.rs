mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hybridrec(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridrec"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(output: Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

fn fixture_config() -> std::path::PathBuf {
    common::fixture_dir().join("config.toml")
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn train_before_ingest_names_the_missing_step() {
    let out = tempfile::tempdir().unwrap();
    let result = hybridrec(&fixture_config(), out.path(), &["train"]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("run ingest first"), "{stderr}");
}

#[test]
fn recommend_before_sentiment_names_the_missing_step() {
    let out = tempfile::tempdir().unwrap();
    ok(hybridrec(&fixture_config(), out.path(), &["ingest"]));
    ok(hybridrec(&fixture_config(), out.path(), &["train"]));
    let result = hybridrec(&fixture_config(), out.path(), &["recommend", "--movie", "0451279"]);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("run sentiment first"));
}

#[test]
fn full_pipeline_on_the_fixture() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let report = ok(hybridrec(&cfg, out.path(), &["ingest"]));
    assert!(report.contains("movies_kept=12"));
    assert!(report.contains("ratings_kept=30"));
    ok(hybridrec(&cfg, out.path(), &["sentiment"]));
    ok(hybridrec(&cfg, out.path(), &["train"]));

    let stdout = ok(hybridrec(&cfg, out.path(), &["recommend", "--movie", "0451279", "--top", "10"]));
    let rows = data_rows(&stdout);
    assert_eq!(rows.len(), 10);
    assert!(stdout.lines().nth(1).unwrap() == "rank,movie_id,title,H,G,CS");
    assert!(rows.iter().all(|r| !r.contains(",0451279,")), "source movie recommended to itself");
    let file = fs::read_to_string(out.path().join("recommend_0451279.csv")).unwrap();
    assert_eq!(file, stdout);

    let cs: Vec<f64> = rows
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(cs.windows(2).all(|w| w[0] >= w[1]), "CS not descending: {cs:?}");

    let summary = ok(hybridrec(&cfg, out.path(), &["evaluate"]));
    assert!(summary.contains("PLCC"), "{summary}");
    assert!(summary.contains("pure hybrid baseline"));

    let sweep = ok(hybridrec(&cfg, out.path(), &["sweep", "--grid", "0,0.1,...,1.0"]));
    let rows = data_rows(&sweep);
    assert_eq!(rows.len(), 11);
    assert!(rows[3].starts_with("0.3,"));

    // every artifact starts with the same config header
    let mut header = None;
    for entry in fs::read_dir(out.path()).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let first = text.lines().next().unwrap().to_string();
        assert!(first.starts_with("# config="));
        assert_eq!(header.get_or_insert(first.clone()), &first);
    }
}

#[test]
fn rerunning_a_step_is_byte_identical() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    ok(hybridrec(&cfg, out.path(), &["ingest"]));
    ok(hybridrec(&cfg, out.path(), &["train"]));
    let first = fs::read(out.path().join("weights.csv")).unwrap();
    let features = fs::read(out.path().join("features.csv")).unwrap();
    ok(hybridrec(&cfg, out.path(), &["train"]));
    assert_eq!(fs::read(out.path().join("weights.csv")).unwrap(), first);
    assert_eq!(fs::read(out.path().join("features.csv")).unwrap(), features);
}

#[test]
fn changed_config_invalidates_downstream_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    ok(hybridrec(&cfg, out.path(), &["ingest"]));
    let result = hybridrec(&cfg, out.path(), &["--min-year", "2016", "train"]);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("re-run ingest"));

    let report = ok(hybridrec(&cfg, out.path(), &["--min-year", "2016", "ingest"]));
    assert!(report.contains("min_year=2016"));
    ok(hybridrec(&cfg, out.path(), &["--min-year", "2016", "train"]));
}

#[test]
fn errors_exit_nonzero() {
    let out = tempfile::tempdir().unwrap();
    let missing = hybridrec(Path::new("/nonexistent/config.toml"), out.path(), &["ingest"]);
    assert!(!missing.status.success());

    let cfg = fixture_config();
    ok(hybridrec(&cfg, out.path(), &["ingest"]));
    ok(hybridrec(&cfg, out.path(), &["sentiment"]));
    ok(hybridrec(&cfg, out.path(), &["train"]));
    let unknown = hybridrec(&cfg, out.path(), &["recommend", "--movie", "9999999"]);
    assert!(!unknown.status.success());
    let bad_grid = hybridrec(&cfg, out.path(), &["sweep", "--grid", "0,1.5"]);
    assert!(!bad_grid.status.success());
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    fs::write(&cfg, "[fusion]\nomega1 = 0.9\nomega2 = 0.9\n").unwrap();
    let result = hybridrec(&cfg, &dir.path().join("out"), &["ingest"]);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("must equal 1"));
}
