use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn solarcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solarcast"))
        .args(args)
        .current_dir(dir)
        .env_remove("SOLARCAST_OUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = solarcast(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

const SHORT_RUN: [&str; 8] = [
    "--train-from",
    "1971",
    "--train-to",
    "1974",
    "--test-from",
    "1975",
    "--test-to",
    "1976",
];

#[test]
fn synthetic_data_through_the_full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--years", "19", "--seed", "7", "-o", "synth.csv"]);
    ok(
        dir,
        &["run", "--input", "synth.csv", "--model", "naive", "--out-dir", "out"],
    );
    for f in [
        "cleaned.csv",
        "factors.csv",
        "corrected.csv",
        "model.txt",
        "predictions.csv",
        "metrics.csv",
    ] {
        assert!(dir.join("out").join(f).exists(), "{f} missing");
    }
    let metrics = rows(&dir.join("out/metrics.csv"));
    assert_eq!(metrics[0], "model,n,rmse_wh_m2,nrmse,mbe_wh_m2,r_squared");
    assert!(metrics[1].starts_with("naive-pre,731,"), "{}", metrics[1]);
}

#[test]
fn stages_compose_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--years", "6", "--seed", "3", "-o", "raw.csv"]);
    ok(dir, &["clean", "raw.csv", "-o", "cleaned.csv"]);
    ok(
        dir,
        &[
            "preprocess",
            "cleaned.csv",
            "--fit-from",
            "1971",
            "--fit-to",
            "1974",
            "--out-dir",
            "pre",
        ],
    );
    assert_eq!(rows(&dir.join("pre/factors.csv"))[0], "day,y_star,n_years");
    assert_eq!(rows(&dir.join("pre/factors.csv")).len(), 366);

    let out = ok(dir, &["spectrum", "pre/corrected.csv", "-o", "spectrum.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("fisher g ="));
    let spectrum = rows(&dir.join("spectrum.csv"));
    assert_eq!(spectrum[0], "period_days,power");
    let (peak, _) = spectrum[1..]
        .iter()
        .map(|l| {
            let (p, w) = l.split_once(',').unwrap();
            (p.parse::<f64>().unwrap(), w.parse::<f64>().unwrap())
        })
        .fold((0.0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    assert!((peak - 365.0).abs() > 30.0, "corrected spectrum still peaks at {peak}");

    ok(
        dir,
        &[
            "invert",
            "pre/corrected.csv",
            "--factors",
            "pre/factors.csv",
            "-o",
            "back.csv",
        ],
    );
    let cleaned = rows(&dir.join("cleaned.csv"));
    let back = rows(&dir.join("back.csv"));
    assert_eq!(cleaned.len(), back.len());
    for (a, b) in cleaned[1..].iter().zip(&back[1..]) {
        let (da, va) = a.split_once(',').unwrap();
        let (db, vb) = b.split_once(',').unwrap();
        assert_eq!(da, db);
        let (va, vb) = (va.parse::<f64>().unwrap(), vb.parse::<f64>().unwrap());
        assert!((va - vb).abs() <= 1e-9 * va.abs().max(1.0), "{da}: {va} vs {vb}");
    }

    ok(
        dir,
        &[
            "train",
            "cleaned.csv",
            "--model",
            "ar",
            "--train-from",
            "1971",
            "--train-to",
            "1974",
            "-o",
            "ar.txt",
        ],
    );
    assert!(fs::read_to_string(dir.join("ar.txt"))
        .unwrap()
        .starts_with("solarcast-model 1\n"));
    ok(
        dir,
        &[
            "predict",
            "ar.txt",
            "cleaned.csv",
            "--from",
            "1975-01-01",
            "--to",
            "1976-12-31",
            "-o",
            "runs/ar-pre.csv",
        ],
    );
    ok(
        dir,
        &[
            "train",
            "cleaned.csv",
            "--model",
            "naive",
            "--no-preprocess",
            "--train-from",
            "1971",
            "--train-to",
            "1974",
            "-o",
            "naive.txt",
        ],
    );
    ok(
        dir,
        &[
            "predict",
            "naive.txt",
            "cleaned.csv",
            "--from",
            "1975-01-01",
            "--to",
            "1976-12-31",
            "-o",
            "runs/naive-raw.csv",
        ],
    );
    let predictions = rows(&dir.join("runs/ar-pre.csv"));
    assert_eq!(predictions[0], "date,ghi_pred_wh_m2");
    assert_eq!(predictions.len(), 1 + 731);

    ok(
        dir,
        &[
            "evaluate",
            "--measured",
            "cleaned.csv",
            "runs/ar-pre.csv",
            "runs/naive-raw.csv",
            "--out-dir",
            "eval",
        ],
    );
    for f in ["metrics.csv", "seasonal.csv", "monthly.csv", "table1.csv"] {
        assert!(dir.join("eval").join(f).exists(), "{f} missing");
    }
    let out = ok(
        dir,
        &[
            "compare",
            "--measured",
            "cleaned.csv",
            "runs/ar-pre.csv",
            "runs/naive-raw.csv",
        ],
    );
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "model,n_runs,nrmse_percent");
    assert!(
        lines[1].starts_with("ar-pre,1,") && lines[2].starts_with("naive-raw,1,"),
        "{table}"
    );
    assert_eq!(fs::read_to_string(dir.join("eval/table1.csv")).unwrap(), table);
}

#[test]
fn evaluating_saved_predictions_reproduces_pipeline_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut args = vec!["run", "--model", "arma", "--out-dir", "out"];
    args.extend(SHORT_RUN);
    ok(dir, &args);
    ok(
        dir,
        &[
            "evaluate",
            "--measured",
            "out/cleaned.csv",
            "out/predictions.csv",
            "--model-id",
            "arma-pre",
            "--out-dir",
            "again",
        ],
    );
    assert_eq!(
        fs::read_to_string(dir.join("out/metrics.csv")).unwrap(),
        fs::read_to_string(dir.join("again/metrics.csv")).unwrap()
    );
}

#[test]
fn repeated_mlp_runs_are_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for out in ["a", "b"] {
        let mut args = vec![
            "run",
            "--model",
            "mlp",
            "--seeds",
            "0,1",
            "--epochs",
            "30",
            "--out-dir",
            out,
        ];
        args.extend(SHORT_RUN);
        ok(dir, &args);
    }
    for f in [
        "predictions.csv",
        "predictions_seed0.csv",
        "predictions_seed1.csv",
        "model_seed1.txt",
        "ci.csv",
    ] {
        assert_eq!(
            fs::read(dir.join("a").join(f)).unwrap(),
            fs::read(dir.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn raw_arm_skips_the_stationarization_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut args = vec!["run", "--model", "naive", "--no-preprocess", "--out-dir", "raw"];
    args.extend(SHORT_RUN);
    ok(dir, &args);
    assert!(!dir.join("raw/factors.csv").exists());
    assert_eq!(
        fs::read(dir.join("raw/cleaned.csv")).unwrap(),
        fs::read(dir.join("raw/corrected.csv")).unwrap()
    );
}

#[test]
fn environment_overrides_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut args = vec!["run", "--model", "naive"];
    args.extend(SHORT_RUN);
    let out = Command::new(env!("CARGO_BIN_EXE_solarcast"))
        .args(&args)
        .current_dir(dir)
        .env("SOLARCAST_OUT_DIR", "from-env")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("from-env/predictions.csv").exists());
    assert!(!dir.join("out").exists());
}

#[test]
fn h0_table_has_one_row_per_day() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["h0-table", "--latitude", "-33.9"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "day,h0_wh_m2");
    assert_eq!(lines.len(), 366);
    assert!(lines[1].starts_with("1,") && lines[365].starts_with("365,"));
}

#[test]
fn exit_codes_follow_the_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let overlap = solarcast(
        dir,
        &["run", "--train-to", "1988", "--test-from", "1988", "--out-dir", "never"],
    );
    assert_eq!(overlap.status.code(), Some(1));
    assert!(!dir.join("never").exists(), "work started before validation");

    assert_eq!(solarcast(dir, &["clean", "missing.csv"]).status.code(), Some(1));
    assert_eq!(solarcast(dir, &["run", "--model", "lstm"]).status.code(), Some(1));

    fs::write(dir.join("bad.csv"), "date,ghi_wh_m2\n1971-01-01,abc\n").unwrap();
    let bad = solarcast(dir, &["clean", "bad.csv"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&bad.stderr).contains("line 2"),
        "{}",
        String::from_utf8_lossy(&bad.stderr)
    );
}
