use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsc::io::pfm;
use rsc::record::ModelRecord;
use rsc::texture::{band_limited, TextureSpec};

fn rsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsc"))
        .args(args)
        .env_remove("RSC_THREADS")
        .output()
        .expect("run rsc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn count_ext(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == ext)
        })
        .count()
}

fn synth(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["synth", "--out", s(out)];
    args.extend_from_slice(extra);
    rsc(&args)
}

#[test]
fn synth_writes_rs_pair_and_gs_stack() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("checker.pfm");
    let img = band_limited(&TextureSpec::new(48, 64, 4));
    pfm::write(&base, &img).unwrap();
    let out = tmp.path().join("d");
    let o = synth(
        &out,
        &["--base", s(&base), "--motion", "3,0", "--rows", "64"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(count_ext(&out, "pfm"), 2);
    assert_eq!(count_ext(&out.join("gs"), "pfm"), 64);
    assert!(out.join("t2b.png").exists() && out.join("b2t.png").exists());
    let rec = ModelRecord::read(&out.join("model.txt")).unwrap();
    assert_eq!(rec.model.params(), vec![3.0, 0.0]);
    assert_eq!((rec.config.rows(), rec.config.cols()), (64, 48));
    assert_eq!(
        fs::read_to_string(out.join("run.args"))
            .unwrap()
            .lines()
            .next(),
        Some("synth")
    );
    assert_eq!(pfm::read(&out.join("gs/gs_0001.pfm")).unwrap(), img);
}

#[test]
fn static_synth_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = synth(
        &out,
        &[
            "--motion", "0,0", "--rows", "32", "--cols", "40", "--seed", "9",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(out.join("t2b.pfm")).unwrap(),
        fs::read(out.join("b2t.pfm")).unwrap()
    );
}

#[test]
fn synth_from_gs_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("a");
    assert_eq!(
        code(&synth(
            &first,
            &["--motion", "2,-1", "--rows", "16", "--cols", "20"]
        )),
        0
    );
    let second = tmp.path().join("b");
    let o = rsc(&[
        "synth",
        "--gs-dir",
        s(&first.join("gs")),
        "--out",
        s(&second),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["t2b.pfm", "b2t.pfm"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap()
        );
    }
    assert!(!second.join("model.txt").exists());
    let o = rsc(&[
        "synth",
        "--gs-dir",
        s(&first.join("gs")),
        "--rows",
        "8",
        "--out",
        s(&tmp.path().join("c")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn one_row_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = synth(&out, &["--rows", "1"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("degenerate geometry"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
    assert!(!out.exists());
}

#[test]
fn failed_run_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("gs"), "in the way").unwrap();
    let o = synth(&out, &["--rows", "8", "--cols", "8"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(!out.join("t2b.pfm").exists());
    assert!(!out.join("b2t.png").exists());
    assert!(out.join("gs").is_file());
}

#[test]
fn bad_flags_and_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&rsc(&["synth"])), 2);
    assert_eq!(code(&rsc(&["frobnicate"])), 2);
    assert_eq!(code(&synth(&out, &["--motion", "1,2,3"])), 2);
    let missing = tmp.path().join("none.pfm");
    let o = rsc(&[
        "correct",
        "--t2b",
        s(&missing),
        "--b2t",
        s(&missing),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr(&o).trim_end().lines().count(), 1);
    let junk = tmp.path().join("junk.pfm");
    fs::write(&junk, b"P6\n1 1\n255\n\0\0\0").unwrap();
    let o = rsc(&[
        "correct",
        "--t2b",
        s(&junk),
        "--b2t",
        s(&junk),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("at byte 0"), "{}", stderr(&o));
    assert!(!out.exists());
    assert_eq!(code(&rsc(&["--help"])), 0);
}

fn correct(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let (t, b) = (data.join("t2b.pfm"), data.join("b2t.pfm"));
    let mut args = vec!["correct", "--t2b", s(&t), "--b2t", s(&b), "--out", s(out)];
    args.extend_from_slice(extra);
    rsc(&args)
}

fn frames(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".pfm"))
        .collect();
    names.sort();
    names
}

#[test]
fn correct_recovers_planted_translation() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert_eq!(code(&synth(&data, &["--motion", "3,0", "--seed", "11"])), 0);
    let out = tmp.path().join("c");
    let o = correct(&data, &out, &["--frames", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = ModelRecord::read(&out.join("model.txt")).unwrap();
    let p = rec.model.params();
    assert!((p[0] - 3.0).abs() <= 0.1 && p[1].abs() <= 0.1, "{p:?}");
    assert_eq!(frames(&out.join("frames")), ["gs_0001.pfm", "gs_0064.pfm"]);

    let trace = fs::read_to_string(out.join("loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iteration,stage,loss"));
    let losses: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));

    let metrics = fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = metrics
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let evals = records.iter().filter(|r| r["record"] == "eval").count();
    let last = records.last().unwrap();
    assert_eq!(last["record"], "final");
    assert_eq!(last["evaluations"].as_u64().unwrap() as usize, evals);
    assert!(records
        .iter()
        .filter(|r| r["record"] == "eval")
        .all(|r| r["l_self"].is_f64()));

    // Ground truth GS frames at the same rows score well.
    let gt = tmp.path().join("gt");
    fs::create_dir(&gt).unwrap();
    for f in ["gs_0001.pfm", "gs_0064.pfm"] {
        fs::copy(data.join("gs").join(f), gt.join(f)).unwrap();
    }
    let o = rsc(&[
        "eval",
        "--pred-dir",
        s(&out.join("frames")),
        "--gt-dir",
        s(&gt),
        "--jsonl",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mean: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    assert!(mean["psnr"].as_f64().unwrap() > 30.0, "{mean}");
}

#[test]
fn correct_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert_eq!(
        code(&synth(
            &data,
            &["--motion", "1.5,0.5", "--rows", "32", "--cols", "32"]
        )),
        0
    );
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = correct(
            &data,
            &out,
            &["--frames", "5", "--max-iters", "10", "--seed", "3"],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in [
        "model.txt",
        "loss_trace.csv",
        "metrics.jsonl",
        "frames/gs_0001.pfm",
        "frames/gs_0032.pfm",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let frames_a = frames(&a.join("frames"));
    assert_eq!(frames_a.len(), 5);
}

#[test]
fn correct_stage_two_logs_cropped_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert_eq!(
        code(&synth(
            &data,
            &["--motion", "2,0", "--rows", "320", "--cols", "320"]
        )),
        0
    );
    let out = tmp.path().join("c");
    let o = correct(
        &data,
        &out,
        &[
            "--stages",
            "2",
            "--crop",
            "32",
            "--max-iters",
            "1",
            "--frames",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains("pseudo targets 256x256 (crop 32)"),
        "{}",
        stdout(&o)
    );
    let metrics = fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    let stage2: serde_json::Value = metrics
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|r| r["record"] == "stage" && r["stage"] == 2)
        .unwrap();
    assert_eq!(stage2["target_rows"], 256);
    assert_eq!(stage2["target_cols"], 256);
}

#[test]
fn correct_rejects_crop_too_large_for_input() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert_eq!(code(&synth(&data, &["--rows", "64"])), 0);
    let out = tmp.path().join("c");
    let o = correct(&data, &out, &["--stages", "2", "--crop", "32"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
    assert!(!out.exists());
}

fn eval_records(o: &Output) -> Vec<serde_json::Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn eval_identity_counts_and_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("p"), tmp.path().join("g"));
    fs::create_dir(&pred).unwrap();
    fs::create_dir(&gt).unwrap();
    for k in 0..9u64 {
        let img = band_limited(&TextureSpec::new(24, 20, k));
        let noisy = img.map(|v| (v + 0.01 * (k as f32 - 4.0)).clamp(0.0, 1.0));
        pfm::write(&gt.join(format!("f{k}.pfm")), &img).unwrap();
        pfm::write(&pred.join(format!("f{k}.pfm")), &noisy).unwrap();
    }
    let o = rsc(&["eval", "--pred-dir", s(&gt), "--gt-dir", s(&gt), "--jsonl"]);
    assert_eq!(code(&o), 0);
    let recs = eval_records(&o);
    assert!(recs.iter().all(|r| r["ssim"] == 1.0 && r["psnr"] == 99.0));

    let out = tmp.path().join("m");
    let o = rsc(&[
        "eval",
        "--pred-dir",
        s(&pred),
        "--gt-dir",
        s(&gt),
        "--jsonl",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = eval_records(&o);
    assert_eq!(recs.len(), 10);
    let (frames, mean) = recs.split_at(9);
    assert_eq!(mean[0]["frame"], "mean");
    for key in ["psnr", "ssim"] {
        let avg = frames.iter().map(|r| r[key].as_f64().unwrap()).sum::<f64>() / 9.0;
        assert!((avg - mean[0][key].as_f64().unwrap()).abs() < 1e-9);
    }
    assert_eq!(
        fs::read_to_string(out.join("metrics.jsonl")).unwrap(),
        stdout(&o)
    );

    let o = rsc(&["eval", "--pred-dir", s(&pred), "--gt-dir", s(&gt)]);
    assert!(stdout(&o).lines().next().unwrap().starts_with("frame"));
    assert_eq!(stdout(&o).lines().count(), 11);

    fs::remove_file(pred.join("f0.pfm")).unwrap();
    let o = rsc(&["eval", "--pred-dir", s(&pred), "--gt-dir", s(&gt)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("frame count mismatch"));
}

#[test]
fn thread_cap_env() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("g");
    fs::create_dir(&dir).unwrap();
    pfm::write(
        &dir.join("a.pfm"),
        &band_limited(&TextureSpec::new(12, 12, 1)),
    )
    .unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_rsc"))
            .args([
                "eval",
                "--pred-dir",
                s(&dir),
                "--gt-dir",
                s(&dir),
                "--jsonl",
            ])
            .env("RSC_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("1")), 0);
    assert_eq!(code(&run("0")), 2);
    assert_eq!(code(&run("many")), 2);
}

#[test]
fn ambiguity_demo() {
    let tmp = tempfile::tempdir().unwrap();
    let out: PathBuf = tmp.path().join("demo");
    let o = rsc(&["demo-ambiguity", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(
        stdout(&o).contains("identical: true, maxdiff 0"),
        "{}",
        stdout(&o)
    );
    assert_eq!(
        pfm::read(&out.join("tilted.pfm")).unwrap(),
        pfm::read(&out.join("vertical.pfm")).unwrap()
    );

    let o = rsc(&["demo-ambiguity", "--tilt-offset", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("identical: false"));
    let o = rsc(&["demo-ambiguity", "--tilt-offset", "-1"]);
    assert!(stdout(&o).contains("identical: false"));

    let o = rsc(&["demo-ambiguity", "--v2", "0"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("identical: true"));

    let o = rsc(&["demo-ambiguity", "--v2", "1e6"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("leaves the"), "{}", stderr(&o));
}
