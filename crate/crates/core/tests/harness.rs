use std::fs;
use std::path::{Path, PathBuf};

use agebif::harness::{
    main_with_args, HarnessError, Mode, ProfileSpec, ScenarioConfig, BRANCH_HEADER, SEMITRIVIAL_HEADER,
};
use tempfile::TempDir;

const SMALL: &str = r#"
[grid]
n_interior = 12
[age]
steps = 32
[run]
eta_values = [1.3]
xi_values = [0.9, 2.0]
semitrivial_values = [0.8, 1.5, 2.5]
eta_max = 4.0
xi_max = 4.0
limit_samples = 3
branches = ["b3", "s3", "s4"]
[run.continuation]
max_step = 0.1
param_limit = 3.0
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(mode: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![
        "agebif".to_string(),
        mode.to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    main_with_args(args)
}

#[test]
fn empty_config_uses_desk_defaults() {
    let cfg = ScenarioConfig::from_toml("").unwrap();
    assert_eq!(cfg, ScenarioConfig::default());
    assert_eq!((cfg.grid.n_interior, cfg.age.steps), (64, 128));
    assert_eq!(cfg.profiles.prey, ProfileSpec::Constant);
    assert_eq!(cfg.run.mode, None);
}

#[test]
fn invalid_configs_are_rejected() {
    let cases = [
        "[params]\nalpha1 = -1.0\n",
        "[profiles.prey]\nkind = \"table\"\nvalues = [1.0, 2.0]\n",
        "[profiles.predator]\nkind = \"exp_decay\"\nrate = -2.0\n",
        "[run]\neta_max = 0.5\n",
        "[run.continuation]\nmin_step = 1.0\n",
        "[verify]\ntrials = 0\n",
        "[grid]\nn_interior = 0\n",
    ];
    for text in cases {
        let err = ScenarioConfig::from_toml(text).unwrap_err();
        assert!(matches!(err, HarnessError::Validation(_)), "{text}: {err}");
        assert_eq!(err.exit_code(), 1);
    }
    let err = ScenarioConfig::from_toml("[grid]\ncells = 4\n").unwrap_err();
    assert!(matches!(err, HarnessError::Parse(_)));
}

#[test]
fn table_profile_of_matching_length_loads() {
    let values: Vec<String> = (0..=16).map(|k| format!("{}", 1.0 + k as f64 / 16.0)).collect();
    let text = format!(
        "[age]\nsteps = 16\n[profiles.prey]\nkind = \"table\"\nvalues = [{}]\n",
        values.join(", ")
    );
    let cfg = ScenarioConfig::from_toml(&text).unwrap();
    let model = cfg.build_model().unwrap();
    assert!((model.prey.scalar_reduction(&model.grids, 0.0) - 1.0).abs() < 1e-12);
}

#[test]
fn cli_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let small = write_config(dir.path(), "small.toml", SMALL);
    assert_eq!(run("eigen", &small, &out, &[]), 0);
    assert!(out.join("eigen.json").exists());

    let missing = dir.path().join("absent.toml");
    assert_eq!(run("eigen", &missing, &out, &[]), 1);

    let pinned = write_config(dir.path(), "pinned.toml", "[run]\nmode = \"eigen\"\n");
    assert_eq!(run("semitrivial", &pinned, &out, &[]), 1);

    let huge = write_config(
        dir.path(),
        "huge.toml",
        "[grid]\nn_interior = 8\n[age]\nsteps = 16\n[run]\nsemitrivial_values = [100.0]\n",
    );
    let failed = dir.path().join("failed");
    assert_eq!(run("semitrivial", &huge, &failed, &[]), 2);
    let status = fs::read_to_string(failed.join("status.json")).unwrap();
    assert!(status.contains("\"complete\": false"));

    assert_eq!(main_with_args(["agebif", "nonsense"]), 1);
}

#[test]
fn semitrivial_and_branch_outputs_have_fixed_headers() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let small = write_config(dir.path(), "small.toml", SMALL);
    assert_eq!(run("semitrivial", &small, &out, &[]), 0);
    let prey = fs::read_to_string(out.join("semitrivial_prey.csv")).unwrap();
    let lines: Vec<&str> = prey.lines().collect();
    assert_eq!(lines[0], SEMITRIVIAL_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].contains("trivial") && lines[2].contains("positive"));

    assert_eq!(run("continue", &small, &out, &[]), 0);
    for kind in ["b3", "s3", "s4"] {
        let csv = fs::read_to_string(out.join(format!("branch_{kind}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some(BRANCH_HEADER));
        assert!(csv.lines().count() > 2, "{kind}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("branches.json")).unwrap()).unwrap();
    let b3 = json.as_array().unwrap().iter().find(|b| b["kind"] == "b3").unwrap();
    assert_eq!(b3["termination"], "joined_B1");
}

#[test]
fn empty_ranges_give_empty_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "empty.toml",
        "[grid]\nn_interior = 8\n[age]\nsteps = 16\n[run]\neta_values = []\nxi_values = []\nsemitrivial_values = []\nlimit_samples = 0\n",
    );
    assert_eq!(run("semitrivial", &cfg, &out, &[]), 0);
    assert_eq!(
        fs::read_to_string(out.join("semitrivial_predator.csv")).unwrap().trim(),
        SEMITRIVIAL_HEADER
    );
    assert_eq!(run("bifpoints", &cfg, &out, &[]), 0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("bifpoints.json")).unwrap()).unwrap();
    assert_eq!(json["xi0"].as_array().map(|a| a.len()), Some(0));
    assert!(json["n_lower"].is_null());
}

#[test]
fn diagram_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let small = write_config(dir.path(), "small.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("diagram", &small, &a, &[]), 0);
    assert_eq!(run("diagram", &small, &b, &["--parallel"]), 0);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 7);
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn mode_enum_round_trips_through_toml() {
    let cfg = ScenarioConfig::from_toml("[run]\nmode = \"bifpoints\"\n").unwrap();
    assert_eq!(cfg.run.mode, Some(Mode::Bifpoints));
    assert_eq!(Mode::Bifpoints.to_string(), "bifpoints");
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let default = agebif::harness::load_config(&dir.join("default.toml")).unwrap();
    assert_eq!(default, ScenarioConfig::default());
    for name in ["negative_control.toml", "asymmetric.toml"] {
        agebif::harness::load_config(&dir.join(name)).unwrap();
    }
}
