//! End-to-end tests of the `sparsechan` binary: real process invocations,
//! real files, assertions on exit codes and on the output contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsechan"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Per-test scratch directory under the target tree.
fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

/// Data rows of a rendered CSV (header block and column line skipped).
fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const SMALL: &[&str] = &[
    "--M", "12", "--K", "2", "--L", "3", "--trials", "2", "--seed", "7",
];

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[test]
fn bench_writes_a_row_for_every_algorithm_snr_pair() {
    let out_path = scratch("bench_rows").join("table.csv");
    let out = run(&[
        &["bench"],
        SMALL,
        &["--snr", "0:10:5", "--algos", "lse,omp", "--out"],
        &[out_path.to_str().unwrap()],
    ]
    .concat());
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let table = std::fs::read_to_string(&out_path).unwrap();
    let rows = data_rows(&table);
    assert_eq!(rows.len(), 6, "2 algorithms x 3 SNR points");
    let mut pairs: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r[0].clone(), r[1].clone()))
        .collect();
    pairs.sort();
    pairs.dedup();
    assert_eq!(pairs.len(), 6, "every (algorithm, snr) pair exactly once");
    for row in &rows {
        assert_eq!(row.len(), 9);
    }
}

#[test]
fn bench_header_records_version_seed_snr_definition_and_config() {
    let out = run(&[&["bench"], SMALL, &["--snr", "5"]].concat());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("## sparsechan "));
    assert!(text.contains("## snr_definition: per-observation signal power"));
    assert!(text.contains("# M = 12\n"));
    assert!(text.contains("# K = 2\n"));
    assert!(text.contains("# seed = 7\n"));
    assert!(text.contains("# snr = 5\n"));
    assert!(text.contains(
        "algorithm,snr_db,mse,nmse,crb_s,crb_us,mean_iterations,failures,wall_time_s\n"
    ));
}

#[test]
fn bench_reruns_are_byte_identical_without_timing() {
    let dir = scratch("bench_rerun");
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for path in [&a, &b] {
        let out = run(&[
            &["bench"],
            SMALL,
            &["--snr", "10:20:10", "--no-timing", "--out"],
            &[path.to_str().unwrap()],
        ]
        .concat());
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b, "same seed and --no-timing must reproduce every byte");
}

#[test]
fn bench_reruns_agree_on_everything_but_wall_time() {
    let args = [&["bench"], SMALL, &["--snr", "10"]].concat();
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    let strip = |out: &std::process::Output| -> Vec<Vec<String>> {
        data_rows(&stdout(out))
            .into_iter()
            .map(|mut row| {
                row.pop(); // wall_time_s is the last column
                row
            })
            .collect()
    };
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn bench_bound_columns_are_shared_across_algorithms() {
    let out = run(&[
        &["bench"],
        SMALL,
        &["--snr", "5:15:10", "--algos", "lse,slse,omp,omapfg"],
    ]
    .concat());
    assert_eq!(code(&out), 0);
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 8);
    for snr in [5.0, 15.0] {
        let at_point: Vec<&Vec<String>> = rows
            .iter()
            .filter(|r| r[1].parse::<f64>().unwrap() == snr)
            .collect();
        assert_eq!(at_point.len(), 4);
        // The bounds depend only on the shared instance draws, so the crb_s
        // and crb_us cells must be byte-equal across algorithms.
        for row in &at_point[1..] {
            assert_eq!(row[4], at_point[0][4], "crb_s at {snr} dB");
            assert_eq!(row[5], at_point[0][5], "crb_us at {snr} dB");
        }
    }
}

#[test]
fn bench_json_reruns_are_identical_and_parse() {
    let args = [
        &["bench"],
        SMALL,
        &["--snr", "10", "--format", "json", "--no-timing"],
    ]
    .concat();
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);

    let doc: serde_json::Value = serde_json::from_str(&stdout(&first)).unwrap();
    assert_eq!(doc["timing"], "off");
    assert_eq!(doc["config"]["memory"], 12);
    assert_eq!(doc["config"]["seed"], 7);
    let records = doc["records"].as_array().unwrap();
    assert_eq!(records.len(), 4, "default algorithms at one SNR point");
    assert_eq!(records[0]["wall_time_s"], 0.0);
}

#[test]
fn flags_override_config_file_values() {
    let dir = scratch("bench_precedence");
    let cfg_path = dir.join("run.cfg");
    std::fs::write(
        &cfg_path,
        "# experiment setup\nM = 12\nK = 2\nL = 3\ntrials = 9\nseed = 1\nsnr = 5\nalgos = lse\n",
    )
    .unwrap();
    let out = run(&[
        "bench",
        "--config",
        cfg_path.to_str().unwrap(),
        "--trials",
        "3",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# trials = 3\n"), "flag wins over the file");
    assert!(text.contains("# seed = 1\n"), "file wins over the default");
    assert!(text.contains("# M = 12\n"));
}

#[test]
fn unknown_config_key_is_a_configuration_error() {
    let dir = scratch("bench_unknown_key");
    let cfg_path = dir.join("typo.cfg");
    std::fs::write(&cfg_path, "emory = 30\n").unwrap();
    let out = run(&["bench", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("emory"), "stderr names the bad key");
}

#[test]
fn malformed_config_line_is_a_configuration_error() {
    let dir = scratch("bench_malformed");
    let cfg_path = dir.join("broken.cfg");
    std::fs::write(&cfg_path, "M 30\n").unwrap();
    let out = run(&["bench", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 1"));
}

#[test]
fn invalid_snr_range_is_a_configuration_error() {
    let out = run(&[&["bench"], SMALL, &["--snr", "30:10:5"]].concat());
    assert_eq!(code(&out), 2);
}

#[test]
fn hopeless_activity_prior_is_a_configuration_error() {
    let out = run(&["bench", "--M", "8", "--K", "4", "--trials", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("below 1/2"));
}

#[test]
fn unwritable_output_path_is_a_runtime_error() {
    let out = run(&[
        &["bench"],
        SMALL,
        &["--snr", "5", "--out", "/nonexistent-dir/table.csv"],
    ]
    .concat());
    assert_eq!(code(&out), 3);
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[test]
fn verify_passes_and_reports_each_property() {
    let out = run(&["verify"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for property in [
        "oracle-equivalence",
        "decomposition-identity",
        "bandedness",
        "cost-reconciliation",
        "penalty-spot-value",
        "bound-ordering",
        "determinism",
    ] {
        assert!(
            text.contains(&format!("{}: pass", property)),
            "missing pass line for {} in:\n{}",
            property,
            text
        );
    }
}

// ---------------------------------------------------------------------------
// scale
// ---------------------------------------------------------------------------

#[test]
fn scale_emits_the_table_and_upholds_the_contract() {
    let dir = scratch("scale_table");
    let out_path = dir.join("timing.csv");
    let out = run(&["scale", "--runs", "20", "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("linear-in-M: pass"));
    assert!(text.contains("op-counter: pass"));
    assert!(text.contains("state-doubling: pass"));

    let table = std::fs::read_to_string(&out_path).unwrap();
    assert!(table.starts_with("sweep,value,states,op_count,median_s\n"));
    // 3 memory cells + 7 training cells follow the header.
    assert_eq!(table.lines().count(), 1 + 3 + 7);
    assert!(table.contains("M,128,8,2048,"));
    assert!(table.contains("L,8,128,24576,"));
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

#[test]
fn demo_walks_one_instance_through_every_estimator() {
    let out = run(&["demo", "--seed", "3"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("true support: {"));
    assert!(text.contains("SNR = 25 dB"), "default demo point is 25 dB");
    for alg in ["lse", "slse", "omp", "omapfg"] {
        assert!(text.contains(alg), "row for {} missing:\n{}", alg, text);
    }
    assert!(text.contains("objective"), "alternation trace missing");
}
