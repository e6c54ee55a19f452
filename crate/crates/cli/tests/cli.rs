use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use btrf::dataset::{Dataset, Split};
use btrf::forest::read_forest;
use btrf_cli::commands::{estimate, score};
use btrf_cli::report::{parse_json_lines, Record, CSV_HEADER};
use btrf_cli::RunConfig;

const SMALL: &str = "\
# small synthetic scene for fast tests
train_frames = 16
test_frames = 3
tree_count = 2
max_depth = 16
pixels_per_frame = 600
query_budget = 800
sweep = 1,16
record_runtime = false
";

fn btrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btrf")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = btrf(args);
    assert!(
        out.status.success(),
        "btrf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("run.cfg"), format!("{SMALL}{extra}")).unwrap();
        Self { _dir: dir, root }
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }

    fn cfg(&self) -> String {
        self.p("run.cfg")
    }

    fn synth_and_train(&self) {
        run_ok(&["synth", "-c", &self.cfg(), "--output", &self.p("scene")]);
        run_ok(&["train", "-c", &self.cfg(), "--dataset", &self.p("scene"), "--model", &self.p("model.btrf")]);
    }
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn print_defaults_parses_back() {
    let text = run_ok(&["--print-defaults"]);
    assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::default());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(btrf(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(btrf(&["train", "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(btrf(&["train", "--set", "tree_count=0"]).status.code(), Some(1));
    assert_eq!(btrf(&["train", "--dataset", "/definitely/not/here", "--model", "m"]).status.code(), Some(1));
    assert_eq!(btrf(&["inspect"]).status.code(), Some(1));
    assert_eq!(btrf(&["--help"]).status.code(), Some(0));
}

#[test]
fn end_to_end_is_deterministic() {
    let runs: Vec<Workspace> = (0..2).map(|_| Workspace::new("report_format = csv\n")).collect();
    for ws in &runs {
        ws.synth_and_train();
        let summary = run_ok(&[
            "evaluate",
            "-c",
            &ws.cfg(),
            "--dataset",
            &ws.p("scene"),
            "--model",
            &ws.p("model.btrf"),
            "--report",
            &ws.p("out/report.csv"),
        ]);
        assert!(summary.contains("n_max"), "{summary}");
    }
    let (a, b) = (&runs[0], &runs[1]);
    assert_eq!(read(a.p("model.btrf")), read(b.p("model.btrf")));
    for name in ["out/report-n1.csv", "out/report-n16.csv", "out/report-summary.csv", "out/report-poses.csv"] {
        assert_eq!(read(a.p(name)), read(b.p(name)), "{name} differs");
    }

    let csv = String::from_utf8(read(a.p("out/report-n16.csv"))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 3);
    let summary = String::from_utf8(read(a.p("out/report-summary.csv"))).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let manifest: serde_json::Value = serde_json::from_slice(&read(a.p("model.manifest.json"))).unwrap();
    assert_eq!(manifest["trees"].as_array().unwrap().len(), 2);
    assert!(manifest["trees"][0]["objectives_per_level"][0]["balanced"].as_u64().unwrap() == 1);

    let inspect = run_ok(&["inspect", "--model", &a.p("model.btrf")]);
    assert!(inspect.contains("tree 1:") && inspect.contains("balanced"), "{inspect}");

    let reloc = run_ok(&[
        "relocalize",
        "-c",
        &a.cfg(),
        "--dataset",
        &a.p("scene"),
        "--model",
        &a.p("model.btrf"),
        "--output",
        &a.p("poses"),
    ]);
    assert_eq!(reloc.lines().count(), 3);
}

#[test]
fn ground_truth_is_read_only_for_scoring() {
    let ws = Workspace::new("");
    ws.synth_and_train();
    let cfg = RunConfig::from_file(Path::new(&ws.cfg())).unwrap();
    let ds = Dataset::open(ws.p("scene")).unwrap();
    let forest = read_forest(ws.p("model.btrf")).unwrap();
    let estimates = estimate(&ds, &forest, &cfg, &cfg.sweep).unwrap();
    assert_eq!(ds.pose_reads(), 0);
    let (eval, _) = score(&ds, &cfg.sweep, &estimates).unwrap();
    assert_eq!(ds.pose_reads(), ds.frames(Split::Test).len());
    assert_eq!(eval.summaries.len(), 2);
}

#[test]
fn json_lines_report_round_trips() {
    let ws = Workspace::new("report_format = json-lines\nsweep = 4\n");
    ws.synth_and_train();
    run_ok(&[
        "evaluate",
        "-c",
        &ws.cfg(),
        "--dataset",
        &ws.p("scene"),
        "--model",
        &ws.p("model.btrf"),
        "--report",
        &ws.p("r.jsonl"),
    ]);
    let text = String::from_utf8(read(ws.p("r.jsonl"))).unwrap();
    let records = parse_json_lines(&text).unwrap();
    assert_eq!(records.len(), 4);
    assert!(matches!(records.last(), Some(Record::Summary(s)) if s.n_max == 4 && s.frames == 3));
    let again: String = records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    assert_eq!(again, text);
}

#[test]
fn tiny_training_run() {
    let ws = Workspace::new("tree_count = 1\ntrain_frames = 1\npixels_per_frame = 10\nmin_leaf_samples = 1\n");
    run_ok(&["synth", "-c", &ws.cfg(), "--output", &ws.p("scene")]);
    let start = std::time::Instant::now();
    run_ok(&["train", "-c", &ws.cfg(), "--dataset", &ws.p("scene"), "--model", &ws.p("m.btrf")]);
    assert!(start.elapsed().as_secs_f64() < 1.0);
    let forest = read_forest(ws.p("m.btrf")).unwrap();
    assert_eq!(forest.trees().len(), 1);
    assert!(forest.trees()[0].leaf_count() <= 10);
}

#[test]
fn data_errors_exit_2() {
    let ws = Workspace::new("train_frames = 2\n");
    run_ok(&["synth", "-c", &ws.cfg(), "--output", &ws.p("scene")]);
    std::fs::remove_file(ws.root.join("scene/train/frame-000001.pose.txt")).unwrap();
    let out = btrf(&["train", "-c", &ws.cfg(), "--dataset", &ws.p("scene"), "--model", &ws.p("m.btrf")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("frame-000001.pose.txt"), "{err}");

    let outdoor = Workspace::new("synth_mode = outdoor\nlandmarks = 500\n");
    run_ok(&["synth", "-c", &outdoor.cfg(), "--output", &outdoor.p("scene")]);
    std::fs::copy(ws.root.join("scene/train/frame-000000.pose.txt"), ws.root.join("scene/train/frame-000001.pose.txt"))
        .unwrap();
    run_ok(&["train", "-c", &ws.cfg(), "--dataset", &ws.p("scene"), "--model", &ws.p("m.btrf")]);
    let mismatch = btrf(&["evaluate", "-c", &ws.cfg(), "--dataset", &outdoor.p("scene"), "--model", &ws.p("m.btrf")]);
    assert_eq!(mismatch.status.code(), Some(2));

    for f in std::fs::read_dir(ws.root.join("scene/test")).unwrap() {
        std::fs::remove_file(f.unwrap().path()).unwrap();
    }
    let empty = btrf(&["evaluate", "-c", &ws.cfg(), "--dataset", &ws.p("scene"), "--model", &ws.p("m.btrf")]);
    assert_eq!(empty.status.code(), Some(2));
}

#[test]
fn all_frames_failing_exits_3() {
    let ws = Workspace::new("min_final_inliers_3d = 1000000\nsweep = 1\n");
    ws.synth_and_train();
    let out = btrf(&["evaluate", "-c", &ws.cfg(), "--dataset", &ws.p("scene"), "--model", &ws.p("model.btrf")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn outdoor_pipeline() {
    let ws = Workspace::new("synth_mode = outdoor\nmin_leaf_samples = 1\nsweep = 16\n");
    ws.synth_and_train();
    run_ok(&[
        "evaluate",
        "-c",
        &ws.cfg(),
        "--dataset",
        &ws.p("scene"),
        "--model",
        &ws.p("model.btrf"),
        "--report",
        &ws.p("r.csv"),
    ]);
    let csv = String::from_utf8(read(ws.p("r.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")), "{csv}");
}
