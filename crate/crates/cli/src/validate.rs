use anyhow::Result;
use clap::Args;
use splinelc::validate::{run_battery, BatteryConfig};

use crate::output::write_text;
use crate::{Failed, Shared};

#[derive(Args)]
pub struct ValidateArgs {
    /// Swap in a sign predicate that never fires, to confirm the battery
    /// catches it.
    #[arg(long, hide = true)]
    pub corrupt_predicate: bool,
}

fn never(_min: f64, _max: f64) -> bool {
    false
}

pub fn run(shared: &Shared, args: ValidateArgs) -> Result<()> {
    let mut cfg = BatteryConfig {
        seed: shared.seed.unwrap_or(0),
        ..BatteryConfig::default()
    };
    if args.corrupt_predicate {
        cfg.predicate = never;
    }
    let report = run_battery(&cfg);
    for c in &report.checks {
        println!(
            "{}: {} ({:.2}s) {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.seconds,
            c.detail
        );
    }
    let out = shared.out.clone().unwrap_or_else(|| "validation_report.json".into());
    write_text(Some(&out), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!("validation: {} of {} checks passed; report in {}", report.checks.len() - failed, report.checks.len(), out.display());
    if failed > 0 {
        return Err(Failed.into());
    }
    Ok(())
}
