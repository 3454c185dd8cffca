//! Loads a JSON run configuration, synthesizes it and prints the report.
//!
//! Run with `cargo run --release --example run_config -- configs/lqr_topdown_ring.json`.

use std::path::PathBuf;

use distlqr::app::{load_config, report_json, synthesize, Overrides};

fn main() {
    let path: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "configs/vehicle_q2_5.json".into()).into();
    let result = load_config(&path, &Overrides::default()).and_then(|cfg| synthesize(&cfg));
    match result {
        Ok((report, _)) => print!("{}", report_json(&report)),
        Err(e) => {
            eprintln!("error (exit {}): {e}", e.code);
            std::process::exit(e.code);
        }
    }
}
