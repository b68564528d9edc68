use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;

fn chspread(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chspread")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn parse_signal(text: &str) -> Vec<Complex64> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            Complex64::new(f[1], f[2])
        })
        .collect()
}

fn write_signal(path: &Path, values: &[(f64, f64)]) {
    let mut body = String::from("index,re,im\n");
    for (i, (re, im)) in values.iter().enumerate() {
        body.push_str(&format!("{i},{re},{im}\n"));
    }
    fs::write(path, body).unwrap();
}

#[test]
fn codes_walsh_m2() {
    let out = chspread(&["codes", "walsh", "--m", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let (codes, mai) = text.split_once("\n\n").unwrap();
    assert_eq!(codes.lines().count(), 1 + 4 * 4);
    let rows: Vec<Vec<&str>> = mai.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in rows.iter().filter(|r| r[0] != r[1]) {
        assert!(r[4].parse::<f64>().unwrap() < 1e-12);
    }
}

#[test]
fn codes_pn_r3() {
    let dir = tempfile::tempdir().unwrap();
    let out = chspread(&["codes", "pn", "--degree", "3", "--out", p(dir.path())]);
    assert!(out.status.success());
    let codes = fs::read_to_string(dir.path().join("codes.csv")).unwrap();
    assert_eq!(codes.lines().count(), 1 + 7);
    let mai = fs::read_to_string(dir.path().join("mai.csv")).unwrap();
    let row: Vec<&str> = mai.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "1");
    assert!((row[5].parse::<f64>().unwrap() - 1.0 / 7.0).abs() < 1e-15);
}

#[test]
fn codes_ch_p3() {
    let out = chspread(&["codes", "ch", "--p", "3", "--m", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let (codes, _) = text.split_once("\n\n").unwrap();
    let chips: Vec<Complex64> = codes
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.rsplitn(3, ',').collect();
            Complex64::new(f[1].parse().unwrap(), f[0].parse().unwrap())
        })
        .collect();
    assert_eq!(chips.len(), 9);
    assert!(chips.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    assert!(chips.iter().any(|c| c.im.abs() > 0.5));
}

#[test]
fn transform_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let values: Vec<(f64, f64)> = (0..9).map(|i| (i as f64 * 0.5 - 1.0, (i * i) as f64 / 10.0)).collect();
    write_signal(&input, &values);
    let fwd = dir.path().join("fwd");
    assert!(chspread(&["transform", "--input", p(&input), "--p", "3", "--out", p(&fwd)]).status.success());
    let back = chspread(&["transform", "--input", p(&fwd.join("transform.csv")), "--p", "3", "--inverse"]);
    assert!(back.status.success());
    let got = parse_signal(&String::from_utf8(back.stdout).unwrap());
    for (g, (re, im)) in got.iter().zip(&values) {
        assert!((g - Complex64::new(*re, *im)).norm() < 1e-12);
    }
}

#[test]
fn spread_then_despread() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    write_signal(&input, &[(1.0, 0.0), (0.0, -2.0), (0.25, 0.5)]);
    let common = ["--p", "8", "--omega1", "9/8^2", "--chips", "16"];
    let mut args = vec!["spread", "--input", p(&input), "--out", p(dir.path())];
    args.extend(common);
    assert!(chspread(&args).status.success());
    let spread = dir.path().join("spread.csv");
    assert_eq!(fs::read_to_string(&spread).unwrap().lines().count(), 1 + 48);

    let mut args = vec!["despread", "--input", p(&spread), "--estimator", "median"];
    args.extend(common);
    let out = chspread(&args);
    assert!(out.status.success());
    let got = parse_signal(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(got.len(), 3);
    assert!((got[1] - Complex64::new(0.0, -2.0)).norm() < 1e-12);
}

#[test]
fn channel_adds_bursts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    write_signal(&input, &vec![(1.0, 0.0); 25]);
    let out = chspread(&["channel", "--input", p(&input), "--period", "10", "--seed", "5", "--out", p(dir.path())]);
    assert!(out.status.success());
    let noise = fs::read_to_string(dir.path().join("noise.csv")).unwrap();
    let positions: Vec<&str> = noise.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(positions, ["0", "10", "20"]);
    let noisy = parse_signal(&fs::read_to_string(dir.path().join("channel.csv")).unwrap());
    assert_eq!(noisy[1], Complex64::new(1.0, 0.0));
    assert_ne!(noisy[10], Complex64::new(1.0, 0.0));
}

#[test]
fn spectrum_of_a_tone() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let values: Vec<(f64, f64)> = (0..64)
        .map(|n| {
            let t = std::f64::consts::TAU * 5.0 * n as f64 / 64.0;
            (t.cos(), t.sin())
        })
        .collect();
    write_signal(&input, &values);
    let out = chspread(&["spectrum", "--input", p(&input)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("5,")).unwrap();
    let power: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    assert!((power - 64.0).abs() < 1e-9);
    assert!(String::from_utf8(out.stderr).unwrap().contains("bins 5..=5"));
}

#[test]
fn run_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        r#"
pipeline = ["temporal_spread", "despread"]

[input]
kind = "tone"
omega = 0.1
samples = 16
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = chspread(&[
        "run", "--config", p(&cfg), "--out", p(&out), "--p", "2", "--omega1", "3/2^2", "--chips", "4", "--seed", "3",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = fs::read_to_string(out.join("report.toml")).unwrap();
    assert!(report.contains("seed = 3"));
    assert!(report.contains("omega1 = \"3/2^2\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "pipeline = [\"despread\"]\n[input]\nkind = \"tone\"\nomega = 0.1\nsamples = 4\n").unwrap();
    assert_eq!(chspread(&["run", "--config", p(&cfg)]).status.code(), Some(2));
    assert_eq!(chspread(&["codes", "ch", "--m", "1"]).status.code(), Some(2));

    let missing = dir.path().join("missing.csv");
    assert_eq!(chspread(&["transform", "--input", p(&missing), "--p", "2"]).status.code(), Some(3));
    let junk = dir.path().join("junk.csv");
    fs::write(&junk, "index,re,im\n0,one,0\n").unwrap();
    assert_eq!(chspread(&["spectrum", "--input", p(&junk)]).status.code(), Some(3));

    let odd = dir.path().join("odd.csv");
    write_signal(&odd, &[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
    assert_eq!(chspread(&["transform", "--input", p(&odd), "--p", "2"]).status.code(), Some(4));
    assert_eq!(
        chspread(&["codes", "walsh", "--m", "2", "--rows", "4"]).status.code(),
        Some(4)
    );
}
