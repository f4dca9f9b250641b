//! Runs the property suite at desk scale and prints one line per check.

use agebif::harness::{verify_suite, ScenarioConfig};

fn main() {
    let report = verify_suite(&ScenarioConfig::default(), None, false).expect("suite runs");
    println!("{report}");
    std::process::exit(if report.all_pass() { 0 } else { 1 });
}
