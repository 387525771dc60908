//! Subcommand implementations. Each is a pure function of the config and
//! its input files; all outputs land in `config.io.out_dir`.

use std::io::Write;
use std::path::{Path, PathBuf};

use entlink_core::keyrate::{asymptotic_key_length, finite_key_curve, log_grid};
use entlink_core::orbitpass::{altitude_for_counts, evaluate_pass};
use entlink_core::{
    generate_pair_streams, run_pipeline, Channel, CorrelationModel, Error, Party, PassConfig,
    SiftedBlock, TimeTagStream,
};
use serde_json::json;

use crate::config::{ReportFormat, RunConfig};
use crate::error::CliError;
use crate::manifest::{FileRecord, Manifest};
use crate::report::{self, PassRow, PassStatus};
use crate::tagfile::{read_stream, write_stream};

fn out_dir(config: &RunConfig) -> Result<&Path, CliError> {
    let dir = config.io.out_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir)
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) {
    // stdout going away is not a reason to fail the run
    let _ = writeln!(out, "{line}");
}

fn channel_summary(s: &TimeTagStream) -> serde_json::Value {
    let c = s.channel_counts();
    let mut m = serde_json::Map::new();
    for ch in Channel::ALL {
        m.insert(ch.letter().to_string(), json!(c[ch.code() as usize]));
    }
    json!({ "events": s.len(), "per_channel": m })
}

pub fn cmd_simulate(config: &RunConfig, out: &mut dyn Write) -> Result<Manifest, CliError> {
    let sim = config.sim_config();
    sim.validate()?;
    let dir = out_dir(config)?;
    let (alice, bob) = generate_pair_streams(&sim, CorrelationModel::phi_minus())?;

    let ext = config.io.tag_format.extension();
    let mut manifest = Manifest::new("simulate", config);
    for (name, stream) in [("alice", &alice), ("bob", &bob)] {
        let path = dir.join(format!("{name}.{ext}"));
        write_stream(&path, stream).map_err(|e| CliError::tag_file(&path, e))?;
        manifest.outputs.push(FileRecord::of(&path)?);
        let c = stream.channel_counts();
        say(
            out,
            format_args!(
                "{}: {} events (H {} V {} D {} A {}) -> {}",
                stream.party(),
                stream.len(),
                c[0],
                c[1],
                c[2],
                c[3],
                path.display()
            ),
        );
    }
    say(
        out,
        format_args!("duration: {} s, seed {}", sim.duration, sim.seed),
    );
    manifest.summary = json!({
        "duration_s": sim.duration,
        "expected_coincidence_rate": sim.expected_coincidence_rate(),
        "alice": channel_summary(&alice),
        "bob": channel_summary(&bob),
    });
    let path = manifest.write(dir)?;
    say(out, format_args!("manifest: {}", path.display()));
    Ok(manifest)
}

fn input(path: &Option<PathBuf>, which: &str) -> Result<PathBuf, CliError> {
    path.clone().ok_or_else(|| {
        CliError::Config(format!(
            "no {which} time-tag file given (--{which} or [io] {which})"
        ))
    })
}

pub fn cmd_pipeline(config: &RunConfig, out: &mut dyn Write) -> Result<Manifest, CliError> {
    let pipeline = config.pipeline_config()?;
    let alice_path = input(&config.io.alice, "alice")?;
    let bob_path = input(&config.io.bob, "bob")?;
    let alice =
        read_stream(&alice_path, Party::Alice).map_err(|e| CliError::tag_file(&alice_path, e))?;
    let bob = read_stream(&bob_path, Party::Bob).map_err(|e| CliError::tag_file(&bob_path, e))?;

    let report = run_pipeline(&alice, &bob, &pipeline)?;
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("pipeline", config);
    manifest.inputs.push(FileRecord::of(&alice_path)?);
    manifest.inputs.push(FileRecord::of(&bob_path)?);

    let blocks = dir.join("blocks.csv");
    report::write_blocks_csv(&blocks, &report)?;
    let keyrate = dir.join(format!("keyrate.{}", config.format.extension()));
    match config.format {
        ReportFormat::Csv => report::write_keyrate_csv(&keyrate, &report)?,
        ReportFormat::Json => report::write_json(&keyrate, &report)?,
    }
    manifest.outputs.push(FileRecord::of(&blocks)?);
    manifest.outputs.push(FileRecord::of(&keyrate)?);

    let s = &report.sync;
    let (mean_q, std_q) = report.block_qber_stats();
    say(
        out,
        format_args!(
            "sync: offset {:.1} ps, drift {:.4} ppm, significance {:.1}",
            s.offset, s.drift, s.peak_significance
        ),
    );
    say(
        out,
        format_args!(
            "coincidences {}, sifted {} ({:.1} cps over {:.1} s)",
            report.n_coincidences,
            report.n_sifted,
            report.sifted_rate(),
            report.duration
        ),
    );
    say(
        out,
        format_args!(
            "block qber: mean {:.4} %, std {:.4} %",
            100.0 * mean_q,
            100.0 * std_q
        ),
    );
    for a in &report.aggregates {
        let b = &a.report.block;
        say(
            out,
            format_args!(
                "aggregate {:.0}-{:.0} s: N {}, qber {:.4} %, asymptotic {:.1} bps, finite-size {:.1} bps",
                b.start,
                b.end(),
                b.n_total,
                100.0 * b.qber_hat,
                a.report.asymptotic.rate_bps,
                a.report.sharp.rate_bps
            ),
        );
    }
    manifest.summary = json!({
        "sync": report.sync,
        "n_alice": report.n_alice,
        "n_bob": report.n_bob,
        "n_coincidences": report.n_coincidences,
        "n_sifted": report.n_sifted,
        "sifted_rate_cps": report.sifted_rate(),
        "block_qber_mean": mean_q,
        "block_qber_std": std_q,
        "aggregates": report.aggregates.iter().map(|a| json!({
            "start_s": a.report.block.start,
            "duration_s": a.report.block.duration,
            "N": a.report.block.n_total,
            "qber_hat": a.report.block.qber_hat,
            "asymptotic_bps": a.report.asymptotic.rate_bps,
            "sharp_bps": a.report.sharp.rate_bps,
        })).collect::<Vec<_>>(),
    });
    let path = manifest.write(dir)?;
    say(out, format_args!("manifest: {}", path.display()));
    Ok(manifest)
}

pub fn cmd_keyrate(config: &RunConfig, out: &mut dyn Write) -> Result<Manifest, CliError> {
    let params = config.security()?;
    let k = &config.keyrate;
    if k.n_min == 0 || k.n_max < k.n_min || k.points_per_decade == 0 {
        return Err(CliError::Config(format!(
            "need 0 < n_min <= n_max and points_per_decade > 0, got {}, {}, {}",
            k.n_min, k.n_max, k.points_per_decade
        )));
    }
    let grid = log_grid(k.n_min, k.n_max, k.points_per_decade);
    let curve = finite_key_curve(k.rate_cps, k.qber, &params, &grid)?;
    // one second of data at the configured rate
    let unit = SiftedBlock::synthetic(k.rate_cps.round() as u64, k.qber, 1.0, &params)?;
    let asymptotic = asymptotic_key_length(&unit, &params).rate_bps;

    let dir = out_dir(config)?;
    let path = dir.join(format!("curve.{}", config.format.extension()));
    match config.format {
        ReportFormat::Csv => report::write_curve_csv(&path, &curve, asymptotic)?,
        ReportFormat::Json => report::write_json(
            &path,
            &json!({ "asymptotic_bps": asymptotic, "curve": curve }),
        )?,
    }
    let first_positive = curve.iter().find(|p| p.rate_bps > 0.0).map(|p| p.n_total);
    let last = curve.last().map(|p| p.rate_bps).unwrap_or(0.0);
    say(out, format_args!("asymptotic rate: {asymptotic:.2} bps"));
    match first_positive {
        Some(n) => say(
            out,
            format_args!("first positive finite-size rate at N = {n}"),
        ),
        None => say(
            out,
            format_args!("no positive finite-size rate on the grid"),
        ),
    }
    say(out, format_args!("rate at N = {}: {last:.2} bps", k.n_max));
    say(out, format_args!("curve: {}", path.display()));

    let mut manifest = Manifest::new("keyrate", config);
    manifest.outputs.push(FileRecord::of(&path)?);
    manifest.summary = json!({
        "asymptotic_bps": asymptotic,
        "first_positive_n": first_positive,
        "points": curve.len(),
    });
    let m = manifest.write(dir)?;
    say(out, format_args!("manifest: {}", m.display()));
    Ok(manifest)
}

pub fn cmd_pass(config: &RunConfig, out: &mut dyn Write) -> Result<Manifest, CliError> {
    let params = config.security()?;
    let link = config.link.pass_link();
    let p = &config.pass;
    let base = PassConfig {
        altitude_km: p.altitude_km,
        max_elevation_deg: 90.0,
        min_elevation_deg: p.min_elevation_deg,
        time_step_s: p.time_step_s,
    };
    let altitude = match p.calibrate {
        Some(c) => altitude_for_counts(
            c.sifted_counts,
            &PassConfig {
                max_elevation_deg: c.max_elevation_deg,
                ..base
            },
            &link,
        )?,
        None => p.altitude_km,
    };
    say(out, format_args!("altitude: {altitude:.3} km"));

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for entry in &p.passes {
        let cfg = PassConfig {
            altitude_km: altitude,
            max_elevation_deg: entry.max_elevation_deg,
            ..base
        };
        let mut row = PassRow {
            label: entry.label.clone(),
            max_elevation_deg: entry.max_elevation_deg,
            status: PassStatus::Ok,
            duration_s: None,
            sifted_counts: None,
            skr_bps: None,
            detail: None,
        };
        match evaluate_pass(&cfg, &link, p.qber, &params) {
            Ok(outcome) => {
                row.duration_s = Some(outcome.profile.duration);
                row.sifted_counts = Some(outcome.n_total);
                row.skr_bps = Some(outcome.key.rate_bps);
                outcomes.push(json!({ "label": entry.label, "outcome": outcome }));
            }
            Err(e @ Error::NoVisibility { .. }) => {
                row.status = PassStatus::NoVisibility;
                row.detail = Some(e.to_string());
            }
            Err(e @ (Error::Config { .. } | Error::Domain(_))) => {
                row.status = PassStatus::Error;
                row.detail = Some(e.to_string());
            }
            Err(e) => return Err(e.into()),
        }
        match (&row.status, row.skr_bps) {
            (PassStatus::Ok, Some(skr)) => say(
                out,
                format_args!(
                    "{:<18} {:>5.1} deg  {:>6.1} s  N {:>7}  {:.2} bps",
                    row.label,
                    row.max_elevation_deg,
                    row.duration_s.unwrap_or(0.0),
                    row.sifted_counts.unwrap_or(0),
                    skr
                ),
            ),
            _ => say(
                out,
                format_args!(
                    "{:<18} {:>5.1} deg  {}",
                    row.label,
                    row.max_elevation_deg,
                    row.detail.as_deref().unwrap_or("")
                ),
            ),
        }
        rows.push(row);
    }

    let dir = out_dir(config)?;
    let path = dir.join(format!("pass_table.{}", config.format.extension()));
    match config.format {
        ReportFormat::Csv => report::write_pass_csv(&path, &rows)?,
        ReportFormat::Json => report::write_json(
            &path,
            &json!({ "altitude_km": altitude, "rows": rows, "passes": outcomes }),
        )?,
    }
    say(out, format_args!("table: {}", path.display()));
    let mut manifest = Manifest::new("pass", config);
    manifest.outputs.push(FileRecord::of(&path)?);
    manifest.summary = json!({ "altitude_km": altitude, "rows": rows });
    let m = manifest.write(dir)?;
    say(out, format_args!("manifest: {}", m.display()));
    Ok(manifest)
}

/// Rewrites a time-tag file in the format implied by the output extension.
pub fn cmd_convert(input: &Path, output: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let stream = read_stream(input, Party::Alice).map_err(|e| CliError::tag_file(input, e))?;
    write_stream(output, &stream).map_err(|e| CliError::tag_file(output, e))?;
    say(
        out,
        format_args!(
            "{} events: {} -> {}",
            stream.len(),
            input.display(),
            output.display()
        ),
    );
    Ok(())
}
