use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use entlink_cli::tagfile::{read_binary, read_csv, write_binary, write_csv, HEADER_LEN};
use entlink_core::{Channel, DetectionEvent};
use proptest::prelude::*;
use tempfile::TempDir;

fn entlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entlink"))
        .args(args)
        .env_remove("ENTLINK_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> (PathBuf, PathBuf) {
    let mut args = vec!["--out-dir", s(dir), "simulate"];
    args.extend_from_slice(extra);
    let o = entlink(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ext = if extra.contains(&"csv") {
        "csv"
    } else {
        "qtag"
    };
    (
        dir.join(format!("alice.{ext}")),
        dir.join(format!("bob.{ext}")),
    )
}

fn pipeline(dir: &Path, alice: &Path, bob: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "--out-dir",
        s(dir),
        "pipeline",
        "--alice",
        s(alice),
        "--bob",
        s(bob),
    ];
    args.extend_from_slice(extra);
    entlink(&args)
}

fn events() -> impl Strategy<Value = Vec<DetectionEvent>> {
    proptest::collection::vec((0u64..u64::MAX / 2, 0u8..4), 0..200).prop_map(|v| {
        let mut e: Vec<_> = v
            .into_iter()
            .map(|(t, c)| DetectionEvent::new(t, Channel::from_code(c).unwrap()))
            .collect();
        e.sort();
        e.dedup();
        e
    })
}

proptest! {
    #[test]
    fn binary_round_trip(ev in events()) {
        let mut buf = Vec::new();
        write_binary(&mut buf, &ev).unwrap();
        prop_assert_eq!(buf.len(), HEADER_LEN + 16 * ev.len());
        prop_assert_eq!(read_binary(&buf[..]).unwrap(), ev);
    }

    #[test]
    fn csv_round_trip_matches_binary(ev in events()) {
        let mut text = Vec::new();
        write_csv(&mut text, &ev).unwrap();
        let mut bin = Vec::new();
        write_binary(&mut bin, &ev).unwrap();
        prop_assert_eq!(read_csv(&text[..]).unwrap(), read_binary(&bin[..]).unwrap());
    }
}

#[test]
fn convert_preserves_events() {
    let dir = TempDir::new().unwrap();
    let (alice, _) = simulate(dir.path(), &["--duration", "0.2"]);
    let csv = dir.path().join("alice.csv");
    let back = dir.path().join("back.qtag");
    assert_eq!(code(&entlink(&["convert", s(&alice), s(&csv)])), 0);
    assert_eq!(code(&entlink(&["convert", s(&csv), s(&back)])), 0);
    assert!(std::fs::read_to_string(&csv)
        .unwrap()
        .starts_with("timestamp_ps,channel\n"));
    assert_eq!(
        std::fs::read(&alice).unwrap(),
        std::fs::read(&back).unwrap()
    );
}

#[test]
fn simulate_reports_counts_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let o = entlink(&[
        "--out-dir",
        s(dir.path()),
        "--seed",
        "5",
        "simulate",
        "--duration",
        "0.5",
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(
        out.contains("alice:") && out.contains("bob:") && out.contains("duration: 0.5 s"),
        "{out}"
    );
    let first: Vec<Vec<u8>> = ["alice.qtag", "bob.qtag", "manifest.json"]
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        .collect();
    assert_eq!(
        code(&entlink(&[
            "--out-dir",
            s(dir.path()),
            "--seed",
            "5",
            "simulate",
            "--duration",
            "0.5"
        ])),
        0
    );
    for (f, bytes) in ["alice.qtag", "bob.qtag", "manifest.json"]
        .iter()
        .zip(&first)
    {
        assert_eq!(&std::fs::read(dir.path().join(f)).unwrap(), bytes, "{f}");
    }
    assert_eq!(
        code(&entlink(&[
            "--out-dir",
            s(dir.path()),
            "--seed",
            "6",
            "simulate",
            "--duration",
            "0.5"
        ])),
        0
    );
    assert_ne!(
        std::fs::read(dir.path().join("alice.qtag")).unwrap(),
        first[0]
    );
}

#[test]
fn zero_duration_is_a_field_error() {
    let dir = TempDir::new().unwrap();
    let o = entlink(&["--out-dir", s(dir.path()), "simulate", "--duration", "0"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("duration"), "{}", stderr(&o));
}

#[test]
fn calibrated_pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let (alice, bob) = simulate(
        dir.path(),
        &[
            "--duration",
            "10",
            "--clock-offset",
            "3000000000",
            "--clock-drift",
            "5",
        ],
    );
    let o = pipeline(dir.path(), &alice, &bob, &["--aggregate-window", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    let rate = manifest["summary"]["sifted_rate_cps"].as_f64().unwrap();
    // 3 sigma Poisson over 10 s
    assert!(
        (rate - 24_665.0).abs() < 3.0 * (24_665.0f64 * 10.0).sqrt() / 10.0 + 5.0,
        "{rate}"
    );
    let offset = manifest["summary"]["sync"]["offset"].as_f64().unwrap();
    assert!((offset - 3e9).abs() < 1_000.0);

    let blocks = std::fs::read_to_string(dir.path().join("blocks.csv")).unwrap();
    let mut lines = blocks.lines();
    assert_eq!(lines.next(), Some("timestamp,N,n_pe,mismatches,qber_hat"));
    assert_eq!(lines.count(), 10);
    let keyrate = std::fs::read_to_string(dir.path().join("keyrate.csv")).unwrap();
    assert_eq!(
        keyrate
            .lines()
            .filter(|l| l.starts_with("aggregate,"))
            .count(),
        1
    );

    // replay from the manifest into a fresh directory
    let replay = TempDir::new().unwrap();
    let o = entlink(&[
        "--config",
        s(&dir.path().join("manifest.json")),
        "--out-dir",
        s(replay.path()),
        "pipeline",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["blocks.csv", "keyrate.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(replay.path().join(f)).unwrap(),
            "{f}"
        );
    }

    let json = TempDir::new().unwrap();
    let o = pipeline(
        json.path(),
        &alice,
        &bob,
        &["--format", "json", "--aggregate-window", "10"],
    );
    assert_eq!(code(&o), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json.path().join("keyrate.json")).unwrap())
            .unwrap();
    assert_eq!(report["blocks"].as_array().unwrap().len(), 10);
}

#[test]
fn uncorrelated_streams_exit_2() {
    let dir = TempDir::new().unwrap();
    let (alice, bob) = simulate(
        dir.path(),
        &[
            "--duration",
            "2",
            "--pair-rate",
            "0",
            "--background-rate-per-channel",
            "5000",
        ],
    );
    let o = pipeline(dir.path(), &alice, &bob, &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("no correlation peak"), "{}", stderr(&o));
}

#[test]
fn malformed_files_exit_3() {
    let dir = TempDir::new().unwrap();
    let (alice, bob) = simulate(dir.path(), &["--duration", "0.2"]);
    let bytes = std::fs::read(&alice).unwrap();

    let truncated = dir.path().join("truncated.qtag");
    std::fs::write(&truncated, &bytes[..bytes.len() - 5]).unwrap();
    let o = pipeline(dir.path(), &truncated, &bob, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("truncated"));

    let mut bad = bytes.clone();
    bad[HEADER_LEN + 16 * 3 + 8] = 7;
    let channel7 = dir.path().join("channel7.qtag");
    std::fs::write(&channel7, &bad).unwrap();
    let o = pipeline(dir.path(), &channel7, &bob, &[]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("unknown channel 7"), "{}", stderr(&o));

    let mut magic = bytes.clone();
    magic[..4].copy_from_slice(b"XTAG");
    let bad_magic = dir.path().join("magic.qtag");
    std::fs::write(&bad_magic, &magic).unwrap();
    assert_eq!(code(&pipeline(dir.path(), &bad_magic, &bob, &[])), 3);

    let unsorted = dir.path().join("unsorted.csv");
    std::fs::write(&unsorted, "timestamp_ps,channel\n10,0\n5,1\n").unwrap();
    assert_eq!(code(&pipeline(dir.path(), &unsorted, &bob, &[])), 3);

    // missing file is an i/o failure, not a format one
    assert_eq!(
        code(&pipeline(
            dir.path(),
            &dir.path().join("nope.qtag"),
            &bob,
            &[]
        )),
        1
    );
}

#[test]
fn pass_table_rows() {
    let dir = TempDir::new().unwrap();
    let o = entlink(&["--out-dir", s(dir.path()), "pass"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("pass_table.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(table.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let zero = rows.iter().find(|r| &r[1] == "32").unwrap();
    assert_eq!(&zero[4], "0");
    assert!(rows.iter().all(|r| &r[5] == "ok"));

    let o = entlink(&[
        "--out-dir",
        s(dir.path()),
        "--format",
        "json",
        "pass",
        "--elevation",
        "90,10",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pass_table.json")).unwrap())
            .unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows[0]["status"], "ok");
    assert!(rows[0]["skr_bps"].as_f64().unwrap() > 0.0);
    assert_eq!(rows[1]["status"], "no_visibility");
}

#[test]
fn keyrate_curve_file() {
    let dir = TempDir::new().unwrap();
    let o = entlink(&[
        "--out-dir",
        s(dir.path()),
        "keyrate",
        "--n-min",
        "1000",
        "--n-max",
        "1000000000",
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert!(text.starts_with("N,duration_s,sharp_bps,q_threshold,asymptotic_bps\n"));
    assert!(text.lines().count() > 50);
}

#[test]
fn config_from_environment_and_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 42\n[simulate]\nduration = 7.5\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_entlink"))
        .args(["show-config"])
        .env("ENTLINK_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let shown: entlink_cli::RunConfig = toml::from_str(&stdout(&o)).unwrap();
    assert_eq!(shown.seed, 42);
    assert_eq!(shown.simulate.duration, 7.5);

    let o = Command::new(env!("CARGO_BIN_EXE_entlink"))
        .args(["--seed", "3", "show-config"])
        .env("ENTLINK_CONFIG", &cfg)
        .output()
        .unwrap();
    let shown: entlink_cli::RunConfig = toml::from_str(&stdout(&o)).unwrap();
    assert_eq!(shown.seed, 3);

    std::fs::write(&cfg, "[simulate]\nduraton = 1.0\n").unwrap();
    let o = entlink(&["--config", s(&cfg), "show-config"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("duraton"));
}

#[test]
fn usage_errors_do_not_collide_with_pipeline_codes() {
    let o = entlink(&["pipeline", "--no-such-flag"]);
    assert_eq!(code(&o), 64);
    assert_eq!(code(&entlink(&["--help"])), 0);
}
