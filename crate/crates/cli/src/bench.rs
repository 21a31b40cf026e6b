//! The `bench` subcommand: run the seeded Monte Carlo experiment and write
//! the MSE-vs-SNR table.

use crate::output::OutputFormat;
use crate::{output, BenchArgs, Failure};
use sparsechan::run_monte_carlo;

pub fn run(args: &BenchArgs) -> Result<(), Failure> {
    let cfg = args.overrides.resolve()?;
    let mut records = run_monte_carlo(&cfg).map_err(|e| Failure::Config(e.to_string()))?;

    for r in &records {
        if r.failures > 0 {
            eprintln!(
                "warning: {} at {} dB: {} of {} trials failed{}",
                r.algorithm,
                r.snr_db,
                r.failures,
                cfg.trials,
                if r.flagged {
                    " (flagged: above the 5% threshold)"
                } else {
                    ""
                }
            );
        }
    }

    if args.no_timing {
        for r in &mut records {
            r.wall_time_s = 0.0;
        }
    }

    let body = match args.format {
        OutputFormat::Csv => output::render_csv(&cfg, &records, !args.no_timing),
        OutputFormat::Json => output::render_json(&cfg, &records, !args.no_timing),
    };
    match &args.out {
        Some(path) => std::fs::write(path, &body)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {}", path.display(), e)))?,
        None => print!("{}", body),
    }
    Ok(())
}
