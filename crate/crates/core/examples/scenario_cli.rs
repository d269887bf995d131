//! Drives the command-line verbs from code: a flow run written to disk,
//! destabilization read back from the run directory, a field file round
//! trip.
//!
//! `cargo run --release --example scenario_cli`

use clap::Parser;
use donaldson_lab::{cli, io};

fn main() -> donaldson_lab::Result<()> {
    let dir = std::env::temp_dir().join(format!("donaldson-lab-example-{}", std::process::id()));
    let scenario = dir.join("split.json");
    io::atomic_write(
        &scenario,
        br#"{
  "geometry": { "n": 1, "grid": 16 },
  "bundle": { "preset": "split_1_-1" },
  "flow": { "snapshot_stride": 100 }
}
"#,
    )?;
    let run = dir.join("run");
    for argv in [
        vec!["flow", "--scenario", scenario.to_str().unwrap(), "--out", run.to_str().unwrap()],
        vec!["destab", "--scenario", run.to_str().unwrap(), "--out", run.to_str().unwrap()],
    ] {
        let args = cli::Cli::parse_from(std::iter::once("donaldson-lab").chain(argv));
        let out = cli::run(&args)?;
        println!("[exit {}] {}", out.code, out.summary);
    }
    let h = io::read_field(&run.join("snapshots/snap_00000.bin"))?;
    println!("first snapshot: {}×{} field on {} points", h.rows(), h.cols(), h.geometry().npoints());
    let bad = dir.join("bad.json");
    io::atomic_write(&bad, br#"{"geometry": {"n": 1}}"#)?;
    let args = cli::Cli::parse_from(["donaldson-lab", "flow", "--scenario", bad.to_str().unwrap()]);
    if let Err(e) = cli::run(&args) {
        println!("malformed scenario: {e}");
    }
    std::fs::remove_dir_all(&dir).map_err(|e| donaldson_lab::Error::io(&dir, e))?;
    Ok(())
}
