use std::fs;

use fbsde_core::cli::{
    emit_report, execute_config, run_pipeline, CliError, Command, ConfigError, ExperimentConfig, Format, MANIFEST,
    PATHS, SCHWARZ_HISTORY,
};

fn small_config(dir: &std::path::Path) -> String {
    format!(
        r#"
[problem]
name = "heat_quadratic"

[grid]
l = 3.0
nx = 61
nt = 33

[partition]
I = 3
S = 0.5

[schwarz]
tolerance = 1e-9
max_iter = 200

[sde]
x0 = [0.0]
dt = 0.03125
M = 300
seed = 4

[outputs]
directory = "{}"
formats = ["csv", "json"]
dump_paths = false
"#,
        dir.display()
    )
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(dir.path());
    assert!(ExperimentConfig::from_toml_str(&text).is_ok());
    let typo = text.replace("max_iter", "max_iters");
    assert!(matches!(ExperimentConfig::from_toml_str(&typo), Err(ConfigError::Parse(_))));

    let bad = text.replace("S = 0.5", "S = 2.0").replace("dt = 0.03125", "dt = 0.3").replace("M = 300", "M = 0");
    let cfg = ExperimentConfig::from_toml_str(&bad).unwrap();
    match cfg.validate() {
        Err(ConfigError::Invalid(issues)) => assert_eq!(issues.len(), 3, "{issues:?}"),
        other => panic!("expected validation failure, got {:?}", other.err()),
    }
}

#[test]
fn partition_error_stops_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let cfg = ExperimentConfig::from_toml_str(&small_config(&out).replace("S = 0.5", "S = 2.5")).unwrap();
    let err = execute_config(&cfg, Command::Pipeline).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(err, CliError::Config(_)));
    assert!(!out.exists());
}

#[test]
fn pipeline_writes_summaries_and_optional_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(&small_config(dir.path())).unwrap();
    let run = execute_config(&cfg, Command::Pipeline).unwrap();
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for want in ["schwarz_history.csv", "theta_summary.csv", "ensemble_summary.csv", "manifest.json", "report.json"] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    assert!(!dir.path().join(PATHS).exists());
    let report = run.outcome.schwarz.as_ref().unwrap();
    assert!(report.final_error() <= 1e-8);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["schwarz"]["stop_reason"], "tolerance");
    assert_eq!(manifest["stages_completed"].as_array().unwrap().len(), 4);
    let echoed: ExperimentConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(echoed, cfg);
    let text = serde_json::to_string(&manifest).unwrap();
    assert_eq!(serde_json::from_str::<serde_json::Value>(&text).unwrap(), manifest);

    let history = fs::read_to_string(dir.path().join(SCHWARZ_HISTORY)).unwrap();
    assert_eq!(history.lines().count(), report.history.len() + 1);

    let dumped = tempfile::tempdir().unwrap();
    let text = small_config(dumped.path()).replace("dump_paths = false", "dump_paths = true");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    execute_config(&cfg, Command::Simulate).unwrap();
    let paths = fs::read_to_string(dumped.path().join(PATHS)).unwrap();
    assert_eq!(paths.lines().count(), 1 + 300 * 33);
}

#[test]
fn emission_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(&small_config(dir.path())).unwrap();
    let validated = cfg.validate().unwrap();
    let outcome = run_pipeline(&validated, Command::RunSchwarz).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let formats = [Format::Csv, Format::Json];
    emit_report(&cfg, Command::RunSchwarz, Ok(&outcome), &a, &formats).unwrap();
    emit_report(&cfg, Command::RunSchwarz, Ok(&outcome), &b, &formats).unwrap();
    for name in [SCHWARZ_HISTORY, "theta_summary.csv", "report.json", MANIFEST] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn validate_command_reports_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(dir.path()).replace("formats = [\"csv\", \"json\"]", "formats = [\"json\"]");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let run = execute_config(&cfg, Command::Validate).unwrap();
    assert!(run.outcome.assumptions.is_some());
    assert!(run.outcome.reference.is_none());
    assert!(!dir.path().join(SCHWARZ_HISTORY).exists());
}

#[test]
fn failed_stage_is_recorded_in_manifest() {
    use fbsde_core::cli::{PipelineFailure, Stage};
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(&small_config(dir.path())).unwrap();
    let partial = run_pipeline(&cfg.validate().unwrap(), Command::SolvePde).unwrap();
    let failure = PipelineFailure {
        stage: Stage::Schwarz,
        message: "subdomain 2: linear solve failed".into(),
        partial,
    };
    emit_report(&cfg, Command::Pipeline, Err(&failure), dir.path(), &[Format::Csv]).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["failed_stage"], "schwarz");
    assert_eq!(manifest["stages_completed"], serde_json::json!(["zsolver", "pde"]));
    assert!(dir.path().join("theta_summary.csv").exists());
    assert_eq!(CliError::Numeric { stage: "schwarz", message: String::new() }.exit_code(), 3);
}
