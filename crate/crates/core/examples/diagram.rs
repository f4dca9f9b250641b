//! Full diagram for an asymmetric scenario written as CSV and JSON files.
//! Pass an output directory as the first argument; the default is a
//! directory under the system temp dir.

use std::path::PathBuf;

use agebif::harness::{run_diagram, ScenarioConfig};

const SCENARIO: &str = r#"
[params]
alpha2 = 0.5
beta2 = 2.0

[profiles.predator]
kind = "exp_decay"
rate = 1.5

[run]
eta_values = [1.3, 2.0]
xi_values = [0.9, 2.0]
semitrivial_values = [0.5, 1.5, 3.0]
branches = ["b3", "s3", "s4"]

[run.continuation]
param_limit = 6.0
"#;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("agebif-diagram"));
    let config = ScenarioConfig::from_toml(SCENARIO).expect("valid scenario");
    match run_diagram(&config, &dir, false) {
        Ok(outcome) => {
            println!("{}", outcome.summary.trim_end());
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("diagram failed: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
