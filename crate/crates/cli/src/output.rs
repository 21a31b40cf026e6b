//! Result serialization: CSV with a self-describing `#` header block, or a
//! single JSON document carrying the same metadata.
//!
//! The CSV column order is part of the interface — consumers parse by
//! position — and float cells use 17 significant digits so every f64
//! round-trips exactly. The header block records the toolkit version, the
//! SNR definition, the timing mode, and the full effective configuration:
//! `##` lines are free-form metadata, while `# key = value` lines echo the
//! configuration in config-file syntax, so `sed -n 's/^# //p' table.csv`
//! recovers a config file that reproduces the run.

use crate::config;
use serde::Serialize;
use sparsechan::{ExperimentConfig, ResultRecord};

/// How the SNR axis is defined; recorded in every output so the tables are
/// self-describing.
pub const SNR_DEFINITION: &str =
    "per-observation signal power, 10*log10(||U*h||^2 / (N*sigma^2)), noise ~ N(0, sigma^2 I)";

/// CSV column order (fixed interface).
pub const CSV_COLUMNS: &str =
    "algorithm,snr_db,mse,nmse,crb_s,crb_us,mean_iterations,failures,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// 17 significant digits: enough to reproduce any f64 bit-for-bit.
fn float(v: f64) -> String {
    format!("{:.16e}", v)
}

fn timing_mode(timing: bool) -> &'static str {
    if timing {
        "measured"
    } else {
        "off"
    }
}

/// Render the result table as CSV with its `#` header block.
pub fn render_csv(cfg: &ExperimentConfig, records: &[ResultRecord], timing: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!("## sparsechan {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("## snr_definition: {}\n", SNR_DEFINITION));
    out.push_str(&format!("## timing: {}\n", timing_mode(timing)));
    for line in config::echo(cfg).lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(CSV_COLUMNS);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.algorithm.id(),
            float(r.snr_db),
            float(r.mse),
            float(r.nmse),
            float(r.crb_s),
            float(r.crb_us),
            float(r.mean_iterations),
            r.failures,
            float(r.wall_time_s),
        ));
    }
    out
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    version: &'static str,
    snr_definition: &'static str,
    timing: &'static str,
    config: &'a ExperimentConfig,
    records: &'a [ResultRecord],
}

/// Render the result table as one pretty-printed JSON document.
pub fn render_json(cfg: &ExperimentConfig, records: &[ResultRecord], timing: bool) -> String {
    let doc = JsonDocument {
        version: env!("CARGO_PKG_VERSION"),
        snr_definition: SNR_DEFINITION,
        timing: timing_mode(timing),
        config: cfg,
        records,
    };
    let mut body = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    body.push('\n');
    body
}
