//! Experiment configuration plumbing.
//!
//! The config file is flat `key = value` text: UTF-8, one pair per line,
//! `#` starts a comment, blank lines are ignored. Unknown keys are rejected
//! so a typo cannot silently fall back to a default. Command-line flags
//! override file values, which override the built-in defaults; the effective
//! configuration is echoed into every output header in this same syntax.

use sparsechan::{Algorithm, ExperimentConfig};
use std::fmt::Write as _;
use std::path::Path;

/// Keys accepted in config files, mirroring the command-line overrides.
const KEYS: [&str; 9] = [
    "M", "K", "L", "snr", "trials", "eps", "max_iter", "seed", "algos",
];

/// Apply a config file on top of `cfg`.
pub fn apply_file(cfg: &mut ExperimentConfig, path: &Path) -> Result<(), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {}", path.display(), e))?;
    apply_text(cfg, &text).map_err(|e| format!("{}: {}", path.display(), e))
}

/// Apply config text (`key = value` lines) on top of `cfg`.
pub fn apply_text(cfg: &mut ExperimentConfig, text: &str) -> Result<(), String> {
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "line {}: expected 'key = value', got '{}'",
                idx + 1,
                line
            ));
        };
        apply_pair(cfg, key.trim(), value.trim()).map_err(|e| format!("line {}: {}", idx + 1, e))?;
    }
    Ok(())
}

/// Apply one key/value pair; unknown keys are an error.
fn apply_pair(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "M" => cfg.memory = parse_num(key, value)?,
        "K" => cfg.sparsity = parse_num(key, value)?,
        "L" => cfg.training_len = parse_num(key, value)?,
        "snr" => cfg.snr_grid_db = parse_snr_grid(value)?,
        "trials" => cfg.trials = parse_num(key, value)?,
        "eps" => cfg.eps = parse_num(key, value)?,
        "max_iter" => cfg.max_iter = parse_num(key, value)?,
        "seed" => cfg.seed = parse_num(key, value)?,
        "algos" => cfg.algorithms = parse_algos(value)?,
        other => {
            return Err(format!(
                "unknown key '{}' (accepted: {})",
                other,
                KEYS.join(", ")
            ));
        }
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(what: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("invalid {} '{}': {}", what, value, e))
}

/// Parse an SNR grid: `"a:b:step"` (inclusive range), a comma-separated
/// list of dB values, or a single value.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty SNR grid".into());
    }
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("SNR range '{}' must be start:stop:step", s));
        }
        let a: f64 = parse_num("SNR start", parts[0].trim())?;
        let b: f64 = parse_num("SNR stop", parts[1].trim())?;
        let step: f64 = parse_num("SNR step", parts[2].trim())?;
        if step <= 0.0 {
            return Err(format!("SNR step must be positive, got {}", step));
        }
        if b < a {
            return Err(format!("SNR stop {} is below start {}", b, a));
        }
        // Tolerance keeps b itself in the grid despite float accumulation.
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| a + step * k as f64).collect()
    } else {
        s.split(',')
            .map(|v| parse_num::<f64>("SNR value", v.trim()))
            .collect::<Result<_, _>>()?
    };
    if let Some(bad) = grid.iter().find(|v| !v.is_finite()) {
        return Err(format!("SNR values must be finite, got {}", bad));
    }
    Ok(grid)
}

/// Parse a comma-separated algorithm list; duplicates are rejected.
pub fn parse_algos(s: &str) -> Result<Vec<Algorithm>, String> {
    let supported: Vec<&str> = Algorithm::ALL.iter().map(|a| a.id()).collect();
    let mut out = Vec::new();
    for name in s.split(',') {
        let name = name.trim();
        let alg = Algorithm::from_id(name).ok_or_else(|| {
            format!(
                "unknown algorithm '{}' (supported: {})",
                name,
                supported.join(", ")
            )
        })?;
        if out.contains(&alg) {
            return Err(format!("algorithm '{}' listed twice", name));
        }
        out.push(alg);
    }
    Ok(out)
}

/// Validate a resolved configuration for command-line use: the library's
/// structural invariants, plus the alternating estimator's prior requirement
/// (the library counts a hopeless prior as per-trial failures; from the
/// command line it is a configuration mistake and is rejected upfront).
pub fn validate(cfg: &ExperimentConfig) -> Result<(), String> {
    cfg.validate().map_err(|e| e.to_string())?;
    if cfg.algorithms.contains(&Algorithm::Omapfg) && 2 * cfg.sparsity >= cfg.memory {
        return Err(format!(
            "activity prior K/M = {}/{} must be below 1/2 for the alternating estimator",
            cfg.sparsity, cfg.memory
        ));
    }
    Ok(())
}

/// Render the effective configuration as the same `key = value` lines the
/// config file accepts, one per line — a stripped output header is itself a
/// valid config file.
pub fn echo(cfg: &ExperimentConfig) -> String {
    let snr = cfg
        .snr_grid_db
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let algos = cfg
        .algorithms
        .iter()
        .map(|a| a.id())
        .collect::<Vec<_>>()
        .join(",");
    let mut s = String::new();
    let _ = writeln!(s, "M = {}", cfg.memory);
    let _ = writeln!(s, "K = {}", cfg.sparsity);
    let _ = writeln!(s, "L = {}", cfg.training_len);
    let _ = writeln!(s, "snr = {}", snr);
    let _ = writeln!(s, "trials = {}", cfg.trials);
    let _ = writeln!(s, "eps = {}", cfg.eps);
    let _ = writeln!(s, "max_iter = {}", cfg.max_iter);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "algos = {}", algos);
    s
}
