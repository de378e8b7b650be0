use std::path::Path;
use std::process::{Command, Output};

fn largemimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_largemimo"))
        .args(args)
        .env_remove("LARGEMIMO_SEED")
        .output()
        .expect("binary runs")
}

fn sweep_to(path: &Path, workers: &str) -> Vec<u8> {
    let out = largemimo(&[
        "ber",
        "--nt",
        "2",
        "--nr",
        "2",
        "--mod",
        "4",
        "--detector",
        "ml",
        "--snr-start",
        "0",
        "--snr-stop",
        "8",
        "--snr-step",
        "4",
        "--frames",
        "400",
        "--seed",
        "11",
        "--workers",
        workers,
        "--no-timing",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::read(path).unwrap()
}

#[test]
fn ber_csv_is_byte_identical_across_reruns_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let a = sweep_to(&dir.path().join("a.csv"), "1");
    let b = sweep_to(&dir.path().join("b.csv"), "1");
    let c = sweep_to(&dir.path().join("c.csv"), "4");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "detector,nt,nr,mod,snr_db,frames,total_bits,bit_errors,ber,plane0_errors,wall_time_s,seed"
    );
    assert_eq!(lines.count(), 3);
    assert!(dir.path().join("a.csv.meta").exists());
}

#[test]
fn meta_sidecar_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let a = sweep_to(&first, "2");
    let meta = dir.path().join("first.csv.meta");
    let second = dir.path().join("second.csv");
    let out = largemimo(&[
        "ber",
        "--config",
        meta.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(a, std::fs::read(second).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "[system]\nnt = 2\nnr = 3\nmod = 16\n\n[sweep]\nsnr_points = 12, 20\nframes = 50\ntiming = off\n\n[detector]\ndetector = rts\n",
    )
    .unwrap();
    let out = largemimo(&[
        "ber",
        "--config",
        cfg.to_str().unwrap(),
        "--nr",
        "4",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("rts,2,4,16,12,"));
    assert!(rows[1].starts_with("rts,2,4,16,20,"));
    assert!(rows.iter().all(|r| r.ends_with(",0.000000,3")));
}

#[test]
fn seed_env_is_a_default_only() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_largemimo"));
        cmd.args([
            "ber",
            "--nt",
            "2",
            "--detector",
            "mmse",
            "--frames",
            "5",
            "--no-timing",
        ]);
        cmd.env_remove("LARGEMIMO_SEED");
        if let Some(e) = env {
            cmd.env("LARGEMIMO_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        let text = String::from_utf8(cmd.output().unwrap().stdout).unwrap();
        text.lines()
            .nth(1)
            .unwrap()
            .rsplit(',')
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(run(None, None), "1");
    assert_eq!(run(Some("42"), None), "42");
    assert_eq!(run(Some("42"), Some("7")), "7");
}

#[test]
fn compare_runs_detectors_on_identical_frames() {
    let out = largemimo(&[
        "compare",
        "--nt",
        "3",
        "--mod",
        "4",
        "--detectors",
        "rts,rts,ml",
        "--snr-points",
        "6,10",
        "--frames",
        "300",
        "--target-errors",
        "0",
        "--no-timing",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for point in rows.chunks(3) {
        assert_eq!(point[0], point[1]);
        assert_eq!(point[2][0], "ml");
        assert_eq!(point[0][5], point[2][5], "frame counts match");
    }
}

#[test]
fn noiseless_runs_are_error_free() {
    let out = largemimo(&[
        "ber",
        "--nt",
        "4",
        "--mod",
        "64",
        "--detector",
        "hybrid",
        "--frames",
        "20",
        "--no-noise",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[7], "0");
}

#[test]
fn lsb_stats_reports_every_plane() {
    let out = largemimo(&[
        "lsb-stats",
        "--nt",
        "4",
        "--mod",
        "64",
        "--snr-points",
        "20",
        "--frames",
        "200",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("snr_db,plane,errors,bits,rate"));
    let planes: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(planes, ["0", "1", "2"]);
}

#[test]
fn check_passes() {
    let out = largemimo(&["check"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 6);
    assert!(text.lines().all(|l| l.starts_with("[PASS]")));
}

#[test]
fn exit_codes() {
    assert_eq!(largemimo(&["ber", "--mod", "8"]).status.code(), Some(1));
    assert_eq!(largemimo(&["ber", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(
        largemimo(&["ber", "--detector", "ml", "--nt", "16", "--mod", "16"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        largemimo(&["ber", "--config", "/no/such/file.conf"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        largemimo(&["compare", "--detectors", "rts"]).status.code(),
        Some(1)
    );
    assert_eq!(
        largemimo(&["ber", "--detector", "bp", "--mod", "16"])
            .status
            .code(),
        Some(1)
    );
    let unwritable = largemimo(&[
        "ber",
        "--nt",
        "2",
        "--frames",
        "5",
        "--out",
        "/no/such/dir/out.csv",
    ]);
    assert_eq!(unwritable.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unwritable.stderr).contains("/no/such/dir/out.csv"));
    assert_eq!(largemimo(&["--help"]).status.code(), Some(0));
}
