use std::path::{Path, PathBuf};
use std::process::Command;

use artifactprobe_cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE, SYNTH_RUN_CONFIG};

struct Ran {
    code: i32,
    out: String,
    err: String,
}

fn cli(args: &[&str], env: &[(&str, &str)]) -> Ran {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["artifactprobe"];
    argv.extend_from_slice(args);
    let env = env
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let code = run(argv, env, &mut out, &mut err);
    Ran {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

const SPEC: &str = r#"
size_per_class = 600
seed = 21

[[plants]]
class = "entailment"
token = "possible"
rate = 0.5
location = "hypothesis"

[[plants]]
class = "neutral"
token = "cardiogenic shock"
rate = 0.5
location = "hypothesis"

[[plants]]
class = "contradiction"
token = "no treatment"
rate = 0.5
location = "hypothesis"

[[kb_plants]]
kind = "hypernym"
rate = 0.1
target_class = "entailment"

[[kb_plants]]
kind = "probable_cause"
rate = 0.1
target_class = "neutral"

[[kb_plants]]
kind = "everything_fine"
rate = 0.1
target_class = "contradiction"
"#;

fn synth_bundle(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.toml");
    std::fs::write(&spec, SPEC).unwrap();
    let bundle = dir.join("bundle");
    let r = cli(
        &[
            "synth",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            bundle.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    bundle.join(SYNTH_RUN_CONFIG)
}

fn str_of(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_then_report_is_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_bundle(dir.path());
    let first = cli(&["--config", str_of(&config), "report"], &[]);
    assert_eq!(first.code, EXIT_OK, "{}", first.err);
    for title in [
        "Baseline micro-F1",
        "Confusion matrix",
        "Token-class PMI",
        "Hypothesis length",
        "Heuristic uniformity tests",
        "Partition evaluation",
    ] {
        assert!(
            first.out.contains(&format!("== {title} ==")),
            "missing {title}"
        );
    }
    assert!(!first.out.contains("not run"));

    // The second run reuses the manifests the first one wrote.
    let second = cli(&["--config", str_of(&config), "report"], &[]);
    assert_eq!(first.out, second.out);
    let out_dir = config.parent().unwrap().join("out");
    assert!(out_dir.join("manifest-hypothesis_only.json").exists());
    assert!(out_dir.join("report.txt").exists());

    // Fresh filtering run with a different thread count gives the same report.
    std::fs::remove_dir_all(&out_dir).unwrap();
    let third = cli(
        &["--config", str_of(&config), "--threads", "2", "report"],
        &[],
    );
    assert_eq!(first.out, third.out);
}

fn grid_cell(cell: &str) -> f64 {
    cell.split(' ').next().unwrap().parse().unwrap()
}

#[test]
fn aflite_grid_orders_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_bundle(dir.path());
    let r = cli(
        &[
            "--config",
            str_of(&config),
            "--format",
            "delimited",
            "aflite",
            "--representation",
            "hypothesis",
        ],
        &[],
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let probe_rows: Vec<Vec<&str>> = r
        .out
        .lines()
        .map(|l| l.split('\t').collect::<Vec<_>>())
        .filter(|c| c.len() == 6 && c[1] == "probe")
        .collect();
    assert_eq!(probe_rows.len(), 2);
    for row in probe_rows {
        let (full, easy, difficult) = (grid_cell(row[3]), grid_cell(row[4]), grid_cell(row[5]));
        assert!(easy >= full && full >= difficult, "{row:?}");
        assert!(easy > difficult);
    }
    let manifest = config
        .parent()
        .unwrap()
        .join("out/manifest-hypothesis_only.json");
    let text = std::fs::read_to_string(manifest).unwrap();
    assert!(text.contains("\"checksum\""));
    assert!(!text.contains("patient has"));
}

#[test]
fn text_only_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_bundle(dir.path());
    let private = cli(&["--config", str_of(&config), "heuristics"], &[]);
    assert_eq!(private.code, EXIT_OK);
    assert!(!private.out.contains("patient has"));
    let open = cli(
        &["--config", str_of(&config), "--include-text", "heuristics"],
        &[],
    );
    assert!(open.out.contains("hypothesis: "));
    let both = cli(
        &[
            "--config",
            str_of(&config),
            "--include-text",
            "--ids-only",
            "heuristics",
        ],
        &[],
    );
    assert_eq!(both.code, EXIT_USAGE);
}

#[test]
fn pmi_without_gazetteer_notes_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_bundle(dir.path());
    let text = std::fs::read_to_string(&config).unwrap();
    let stripped: String = text
        .lines()
        .filter(|l| !l.starts_with("gazetteer"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&config, stripped).unwrap();
    let r = cli(&["--config", str_of(&config), "pmi", "--top", "3"], &[]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("entity merging disabled"));
    assert!(r.out.contains("top 3 per class"));
}

#[test]
fn validate_and_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth_bundle(dir.path());
    let r = cli(&["--config", str_of(&config), "validate"], &[]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("examples: 1800"));
    assert!(r.out.contains("balanced: true"));
    let r = cli(
        &[
            "--config",
            str_of(&config),
            "--format",
            "markdown",
            "lengths",
        ],
        &[],
    );
    assert!(r.out.contains("## Hypothesis length"));
    assert!(r.out.contains("| merged |"));
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["frobnicate"], &[]).code, EXIT_USAGE);
    assert_eq!(cli(&["--help"], &[]).code, EXIT_OK);
    assert_eq!(cli(&["baseline"], &[]).code, EXIT_USAGE);

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.jsonl");
    let r = cli(
        &["baseline"],
        &[("ARTIFACTPROBE_PATHS_TRAIN", str_of(&missing))],
    );
    assert_eq!(r.code, EXIT_DATA);
    assert!(r.err.contains(str_of(&missing)));

    let r = cli(&["baseline"], &[("ARTIFACTPROBE_NO_SUCH_KEY", "1")]);
    assert_eq!(r.code, EXIT_USAGE);

    let config = synth_bundle(dir.path());
    assert_eq!(
        cli(
            &["--config", str_of(&config), "--format", "html", "lengths"],
            &[]
        )
        .code,
        EXIT_USAGE
    );
    assert_eq!(
        cli(
            &["--config", str_of(&config), "--threads", "0", "lengths"],
            &[]
        )
        .code,
        EXIT_USAGE
    );

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"pairID\": \"1\", \"sentence1\": \"a\", \"sentence2\": \"b\", \"gold_label\": \"maybe\"}\n").unwrap();
    let r = cli(
        &["validate"],
        &[("ARTIFACTPROBE_PATHS_TRAIN", str_of(&bad))],
    );
    assert_eq!(r.code, EXIT_DATA);
    assert!(r.err.contains("line 1"));
}

#[test]
fn binary_reports_exit_status() {
    let exe = env!("CARGO_BIN_EXE_artifactprobe");
    let status = Command::new(exe)
        .arg("lengths")
        .env("ARTIFACTPROBE_PATHS_TRAIN", "/nonexistent/train.jsonl")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_DATA));
    let status = Command::new(exe).arg("--version").status().unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
}
