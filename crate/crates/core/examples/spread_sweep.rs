//! The reward-spread experiment: 50 paired replications at spreads 1, 5
//! and 10 on the scaled field setup, then the same sweep with exits off and
//! equal rates as a null. Writes the result files of the first sweep.
//!
//! ```text
//! cargo run --release --example spread_sweep -- [output-dir]
//! ```

use crowd_contest::experiment::{emit_outputs, sweep, ExperimentConfig, SweepResult};
use crowd_contest::sim::ExitModel;

fn report(label: &str, result: &SweepResult) {
    println!("{label}");
    println!(
        "{:>6} {:>10} {:>8} {:>10} {:>8} {:>7}",
        "spread", "mean", "sd", "distinct", "at 90%", "exits"
    );
    for r in &result.rows {
        println!(
            "{:>6} {:>10.1} {:>8.1} {:>10.1} {:>8.3} {:>7.2}",
            r.spread,
            r.mean_total,
            r.sd_total,
            r.mean_distinct,
            r.mean_active_fraction_at_90,
            r.mean_exits
        );
    }
    for c in &result.trend.comparisons {
        println!(
            "  {} -> {}: {} up, {} down, {} tied, sign test p = {:.2e}",
            c.lower_spread,
            c.higher_spread,
            c.sign.wins,
            c.sign.losses,
            c.sign.ties,
            c.sign.p_value
        );
    }
    if let Some(a) = result.trend.anova {
        println!("  ANOVA F({}, {}) = {:.2}", a.df_between, a.df_within, a.f);
    }
    println!("  verdict: {:?}\n", result.trend.verdict);
}

fn main() -> crowd_contest::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "sweep-out".into());
    let config = ExperimentConfig::default();
    let result = sweep(&config)?;
    report("calibrated exits, prior rates", &result);
    let manifest = emit_outputs(&result, &[], out.as_ref())?;
    println!("wrote {} files to {out}\n", manifest.files.len());

    let null = ExperimentConfig {
        exit: ExitModel::disabled(),
        equal_rates: true,
        ..config
    };
    report("null: no exits, lambda_out = lambda_in", &sweep(&null)?);
    Ok(())
}
