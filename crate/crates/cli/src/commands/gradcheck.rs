use myoinr_core::diffnet::gradcheck::{
    run_gradcheck, Corruption, GradcheckOptions, GradcheckReport,
};

use crate::cli::{CorruptionArg, GradcheckArgs};
use crate::config::RunConfig;
use crate::dataset::{create_dir, write_json};
use crate::error::{CliError, CliResult};

pub fn cmd_gradcheck(args: &GradcheckArgs) -> CliResult<GradcheckReport> {
    if args.draws == 0 {
        return Err(CliError::Usage("--draws must be at least 1".into()));
    }
    let opts = GradcheckOptions {
        seed: args.seed,
        jacobian_draws: args.draws,
        corruption: args.corrupt.map(|c| match c {
            CorruptionArg::Jacobian => Corruption::InputJacobian,
            CorruptionArg::Gradient => Corruption::ParamGradient,
        }),
        ..GradcheckOptions::default()
    };
    let report = run_gradcheck(&opts)?;
    println!(
        "gradcheck seed {} ({} parameters, double precision)",
        report.seed, report.param_count
    );
    for c in &report.checks {
        println!(
            "{:<20} max error {:.3e}  threshold {:.0e}  {}",
            c.name,
            c.max_error,
            c.threshold,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_json(&out.join("gradcheck.json"), &report)?;
        RunConfig::new("gradcheck", out, myoinr_core::Precision::F64, 1)
            .option("seed", args.seed)
            .option("draws", args.draws)
            .write()?;
    }
    if !report.passed() {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CliError::Numeric(format!(
            "gradient check failed: {}",
            failed.join(", ")
        )));
    }
    Ok(report)
}
