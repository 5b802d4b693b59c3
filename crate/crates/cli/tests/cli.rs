use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fwips_cli::pipeline;

const SMALL: &str = r#"
seed = 3
repeats = 2

[scenario]
n_aps = 5
n_test = 25

[scenario.bounds]
min = [0.0, 0.0]
max = [6.0, 6.0]

[train]
max_epochs = 15

[svbi.train]
max_epochs = 15
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(ws.config(), SMALL).unwrap();
        ws
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("small.toml")
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fwips"))
            .args(args)
            .arg("--config")
            .arg(self.config())
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn simulate(&self) -> String {
        let data = self.path("data");
        self.ok(&["simulate", "--out", data.to_str().unwrap()]);
        data.to_str().unwrap().to_owned()
    }
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn simulate_creates_nested_output_dirs() {
    let ws = Workspace::new();
    let out = ws.path("a/b/c");
    ws.ok(&["simulate", "--out", out.to_str().unwrap()]);
    for f in [pipeline::RADIO_MAP_FILE, pipeline::TEST_SET_FILE, pipeline::ENVIRONMENT_FILE] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert_eq!(read(&out.join(pipeline::TEST_SET_FILE)).lines().count(), 26);
}

#[test]
fn evaluate_writes_one_row_per_repeat() {
    let ws = Workspace::new();
    let data = ws.simulate();
    let res = ws.path("res");
    let out = ws.ok(&["evaluate", "--model", "dlpm", "--data", &data, "--out", res.to_str().unwrap()]);
    let csv = read(&res.join("eval_dlpm.csv"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("run,")).count(), 2);
    assert!(csv.contains("summary,rmse,") && csv.contains("summary,ci95,"));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("rmse "));
}

#[test]
fn knn_is_evaluated_once_and_persists_only_a_reference() {
    let ws = Workspace::new();
    let data = ws.simulate();
    let res = ws.path("res");
    let res = res.to_str().unwrap();
    ws.ok(&["evaluate", "--model", "knn", "--data", &data, "--out", res]);
    let csv = read(&ws.path("res/eval_knn.csv"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("run,")).count(), 1);

    ws.ok(&["train", "--model", "knn", "--data", &data, "--out", res]);
    let doc: serde_json::Value = serde_json::from_str(&read(&ws.path("res/model.json"))).unwrap();
    assert_eq!(doc["model"], "knn");
    assert!(doc["radio_map"].as_str().unwrap().ends_with(pipeline::RADIO_MAP_FILE));
    assert!(!ws.path("res/history.csv").exists());
    let model = ws.path("res/model.json");
    ws.ok(&["evaluate", "--model-file", model.to_str().unwrap(), "--data", &data, "--out", res]);
}

#[test]
fn joint_model_round_trips_and_generates_a_map() {
    let ws = Workspace::new();
    let data = ws.simulate();
    let res = ws.path("res");
    let res_s = res.to_str().unwrap();
    ws.ok(&["train", "--model", "svbi-joint", "--data", &data, "--out", res_s]);
    let model_path = res.join(pipeline::MODEL_FILE);
    let (rm, test) = pipeline::load_data(Path::new(&data)).unwrap();
    let model = pipeline::load_model(&model_path).unwrap();
    let copy = res.join("copy.json");
    pipeline::save_model(&model, Path::new(&data).join(pipeline::RADIO_MAP_FILE).as_path(), &copy).unwrap();
    assert_eq!(read(&copy), read(&model_path));
    let again = pipeline::load_model(&copy).unwrap();
    assert_eq!(model.predict(test.rss()).unwrap(), again.predict(test.rss()).unwrap());

    ws.ok(&["generate-rm", "--model-file", model_path.to_str().unwrap(), "--data", &data, "--out", res_s]);
    let generated = fwips_core::data::load_radio_map(res.join(pipeline::GENERATED_FILE)).unwrap();
    assert_eq!(generated.n_rp(), rm.n_rp());
    let cmp = read(&res.join(pipeline::COMPARISON_FILE));
    assert!(cmp.starts_with("threshold,cpa_original,cpa_generated,gap\n"));
    assert_eq!(cmp.lines().filter(|l| !l.starts_with('#')).count(), 1 + 41);
}

#[test]
fn separate_model_cannot_generate() {
    let ws = Workspace::new();
    let data = ws.simulate();
    let res = ws.path("res");
    ws.ok(&["train", "--model", "svbi-sep", "--data", &data, "--out", res.to_str().unwrap()]);
    let model = res.join(pipeline::MODEL_FILE);
    let out = ws.run(&["generate-rm", "--model-file", model.to_str().unwrap(), "--data", &data, "--out", res.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid state"), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!res.join(pipeline::GENERATED_FILE).exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    let ws = Workspace::new();
    assert!(!ws.run(&["train", "--model", "svm"]).status.success());
    assert!(!ws.run(&["frobnicate"]).status.success());
    let bad = ws.path("bad.toml");
    std::fs::write(&bad, "repeats = 0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fwips"))
        .args(["simulate", "--config", bad.to_str().unwrap(), "--out", ws.path("x").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!ws.path("x").exists());
}

#[test]
fn flags_override_the_config_file() {
    let ws = Workspace::new();
    let a = ws.path("a");
    let b = ws.path("b");
    ws.ok(&["simulate", "--out", a.to_str().unwrap()]);
    ws.ok(&["simulate", "--seed", "4", "--out", b.to_str().unwrap()]);
    assert_ne!(read(&a.join(pipeline::RADIO_MAP_FILE)), read(&b.join(pipeline::RADIO_MAP_FILE)));
}
