//! Sweep the base exit hazard and report the share of workers still active
//! at 90% of the contest, per reward spread.
//!
//! ```text
//! cargo run --release --example exit_calibration -- [replications]
//! ```

use crowd_contest::experiment::{exit_calibration, ExperimentConfig};
use crowd_contest::sim::DEFAULT_BASE_HAZARD;

fn main() -> crowd_contest::Result<()> {
    let replications = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(200);
    let config = ExperimentConfig::default();
    let hazards = [0.02, 0.04, 0.06, DEFAULT_BASE_HAZARD, 0.08, 0.1, 0.15, 0.2];
    println!("active at 90% over {replications} replications (target >= 0.85)");
    println!(
        "{:>6} {}",
        "h0",
        config
            .spreads
            .iter()
            .map(|s| format!("{:>9}", format!("s={s}")))
            .collect::<String>()
    );
    for p in exit_calibration(&config, &hazards, replications)? {
        let cells: String = p
            .survival
            .iter()
            .map(|(_, f)| format!("{f:>9.4}"))
            .collect();
        let mark = if p.base_hazard == DEFAULT_BASE_HAZARD {
            "  <- default"
        } else {
            ""
        };
        println!("{:>6} {cells}{mark}", p.base_hazard);
    }
    Ok(())
}
