//! End-to-end tests of the command-line binary: pipeline wiring, exit
//! codes, output files, and determinism at a scale that runs in seconds.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gpnd"))
}

fn work_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const TINY_CONFIG: &str = "\
latent_dim = 2
epochs = 1
batch_size = 16
learning_rate = 0.002
lambda_recon = 8.0
hist_bins = 15
folds = 5
ratios = 0.3,0.5
seed = 5
encoder_hidden = 8
decoder_hidden = 8
disc_z_hidden = 4
disc_x_hidden = 4
synth_classes = 2
synth_count = 200
synth_ambient_dim = 12
synth_latent_dim = 2
synth_hidden = 8
synth_noise_sigma = 0.01
";

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{TINY_CONFIG}{extra}")).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Generates the tiny corpus into `dir` and returns the dataset path.
fn generate(dir: &Path, cfg: &Path) -> PathBuf {
    let data = dir.join("corpus.gpds");
    run_ok(bin()
        .arg("generate")
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(&data));
    data
}

#[test]
fn generate_writes_dataset_and_manifest_deterministically() {
    let dir = work_dir("cli-generate");
    let cfg = write_config(&dir, "");
    let data = generate(&dir, &cfg);
    let manifest = dir.join("corpus.gpds.manifest.json");
    assert!(data.exists() && manifest.exists());

    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(parsed["count"], 400);
    assert_eq!(parsed["classes"].as_array().unwrap().len(), 2);

    // Same config, second output path: byte-identical dataset.
    let second = dir.join("again.gpds");
    run_ok(bin()
        .arg("generate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&second));
    assert_eq!(fs::read(&data).unwrap(), fs::read(&second).unwrap());

    // A different seed changes the bytes.
    let reseeded = dir.join("reseeded.gpds");
    run_ok(bin()
        .arg("generate")
        .arg("--config")
        .arg(&cfg)
        .arg("--seed")
        .arg("99")
        .arg("--out")
        .arg(&reseeded));
    assert_ne!(fs::read(&data).unwrap(), fs::read(&reseeded).unwrap());
}

#[test]
fn unknown_config_key_exits_1_and_names_the_key() {
    let dir = work_dir("cli-badkey");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "epochz = 3\n").unwrap();
    let (code, stderr) = exit_code(bin()
        .arg("generate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("x.gpds")));
    assert_eq!(code, 1);
    assert!(stderr.contains("epochz"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_1_and_missing_data_exits_2() {
    let (code, _) = exit_code(bin().arg("frobnicate"));
    assert_eq!(code, 1);
    let (code, _) = exit_code(&mut bin());
    assert_eq!(code, 1);

    let dir = work_dir("cli-missing");
    let (code, stderr) = exit_code(bin()
        .arg("eval")
        .arg("--data")
        .arg(dir.join("absent.gpds"))
        .arg("--class")
        .arg("0")
        .arg("--out")
        .arg(dir.join("report.json")));
    assert_eq!(code, 2, "stderr: {stderr}");
}

#[test]
fn train_smoke_run_with_zero_epochs_persists_a_model() {
    let dir = work_dir("cli-train0");
    let cfg = write_config(&dir, "");
    let data = generate(&dir, &cfg);
    let cfg0 = dir.join("zero.cfg");
    fs::write(
        &cfg0,
        format!("{TINY_CONFIG}epochs = 0\n").replace("epochs = 1\n", ""),
    )
    .unwrap();
    let model = dir.join("smoke.gpnd");
    let out = run_ok(bin()
        .arg("train")
        .arg("--config")
        .arg(&cfg0)
        .arg("--data")
        .arg(&data)
        .arg("--class")
        .arg("0")
        .arg("--model")
        .arg(&model));
    assert!(model.exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("threshold"), "stdout: {stdout}");
    // Zero epochs: header only, no loss rows.
    assert_eq!(stdout.lines().filter(|l| l.starts_with("    ")).count(), 0);
}

#[test]
fn train_score_eval_pipeline_products_are_consistent() {
    let dir = work_dir("cli-pipeline");
    let cfg = write_config(&dir, "");
    let data = generate(&dir, &cfg);

    let model = dir.join("model.gpnd");
    let train_report = dir.join("train.json");
    let out = run_ok(bin()
        .arg("train")
        .arg("--config")
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--class")
        .arg("0")
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&train_report));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("epoch"), "stdout: {stdout}");
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&train_report).unwrap()).unwrap();
    // One loss row for the single configured epoch.
    assert_eq!(parsed["losses"].as_array().unwrap().len(), 1);

    // Scoring covers the full corpus, in input order, at any thread count.
    let scores1 = dir.join("scores1.json");
    run_ok(bin()
        .arg("score")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&scores1));
    let scores3 = dir.join("scores3.json");
    run_ok(bin()
        .arg("score")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--threads")
        .arg("3")
        .arg("--out")
        .arg(&scores3));
    assert_eq!(fs::read(&scores1).unwrap(), fs::read(&scores3).unwrap());
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&scores1).unwrap()).unwrap();
    assert_eq!(parsed["count"], 400);
    let records = parsed["records"].as_array().unwrap();
    assert_eq!(records.len(), 400);
    let gamma = parsed["threshold"].as_f64().unwrap();
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["index"].as_u64().unwrap() as usize, i);
        let expected = if r["log_p_x"].as_f64().unwrap() >= gamma {
            "inlier"
        } else {
            "outlier"
        };
        assert_eq!(r["decision"], expected);
    }

    // Evaluation report: folds x ratios entries per mode.
    let report = dir.join("report.json");
    run_ok(bin()
        .arg("eval")
        .arg("--config")
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--class")
        .arg("0")
        .arg("--out")
        .arg(&report));
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let modes = parsed["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 1);
    assert_eq!(modes[0]["mode"], "complete");
    let ratios = modes[0]["ratios"].as_array().unwrap();
    assert_eq!(ratios.len(), 2);
    for ratio in ratios {
        assert_eq!(ratio["per_fold"].as_array().unwrap().len(), 5);
    }

    // Scoring with mismatched data dimensions is a data error.
    let cfg_wide = dir.join("wide.cfg");
    fs::write(
        &cfg_wide,
        TINY_CONFIG.replace("synth_ambient_dim = 12", "synth_ambient_dim = 13"),
    )
    .unwrap();
    let wide = dir.join("wide.gpds");
    run_ok(bin()
        .arg("generate")
        .arg("--config")
        .arg(&cfg_wide)
        .arg("--out")
        .arg(&wide));
    let (code, stderr) = exit_code(bin()
        .arg("score")
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(&wide));
    assert_eq!(code, 2, "stderr: {stderr}");
}

#[test]
fn eval_mode_flag_restricts_the_sweep() {
    let dir = work_dir("cli-mode");
    let cfg = write_config(&dir, "");
    let data = generate(&dir, &cfg);
    let report = dir.join("pz.json");
    run_ok(bin()
        .arg("eval")
        .arg("--config")
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--class")
        .arg("1")
        .arg("--mode")
        .arg("pz_only")
        .arg("--out")
        .arg(&report));
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let modes = parsed["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 1);
    assert_eq!(modes[0]["mode"], "pz_only");

    let (code, stderr) = exit_code(bin()
        .arg("eval")
        .arg("--config")
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--class")
        .arg("1")
        .arg("--mode")
        .arg("bogus")
        .arg("--out")
        .arg(dir.join("x.json")));
    assert_eq!(code, 1);
    assert!(stderr.contains("bogus"), "stderr: {stderr}");
}
