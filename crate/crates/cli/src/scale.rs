//! The `scale` subcommand: time the detector across problem sizes, print a
//! timing table, and check the complexity contract — wall time linear in the
//! channel memory M, state count (and operation count) doubling per unit of
//! training length L.

use crate::{Failure, ScaleArgs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sparsechan::{
    compute_quadratics, lambda_from_prior, map_detect_trellis, QuadraticForm, TrainingModel,
};
use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

const MEMORY_SWEEP: [usize; 3] = [64, 128, 256];
const TRAINING_SWEEP: std::ops::RangeInclusive<usize> = 2..=8;

struct Cell {
    sweep: &'static str,
    value: usize,
    states: u64,
    op_count: u64,
    median_s: f64,
}

/// A reproducible detection problem at the requested size.
fn detection_instance(m: usize, l: usize, seed: u64) -> QuadraticForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((m as u64) << 32) ^ l as u64);
    let training: Vec<f64> = (0..l)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let model = TrainingModel::new(training, m).expect("valid geometry");
    let h_hat: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..model.observation_len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let lambda = lambda_from_prior(0.09, 0.2).expect("valid prior");
    compute_quadratics(&model, &h_hat, &y, lambda)
}

/// Median wall time of a detection over `runs` repetitions (one warm-up).
fn median_detect_time(q: &QuadraticForm, runs: usize) -> f64 {
    black_box(map_detect_trellis(q, q.m()).best_cost());
    let mut samples: Vec<f64> = (0..runs)
        .map(|_| {
            let t0 = Instant::now();
            let run = map_detect_trellis(q, q.m());
            black_box(run.best_cost());
            t0.elapsed().as_secs_f64()
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[runs / 2]
}

fn measure(sweep: &'static str, m: usize, l: usize, value: usize, runs: usize) -> Cell {
    let q = detection_instance(m, l, 0xA5);
    let run = map_detect_trellis(&q, m);
    Cell {
        sweep,
        value,
        states: 1 << (run.bandwidth() - 1),
        op_count: run.op_count(),
        median_s: median_detect_time(&q, runs),
    }
}

pub fn run(args: &ScaleArgs) -> Result<(), Failure> {
    if args.runs == 0 {
        return Err(Failure::Config("--runs must be at least 1".into()));
    }
    if !(2..=16).contains(&args.training_len) {
        return Err(Failure::Config(format!(
            "--L must lie in 2..=16, got {}",
            args.training_len
        )));
    }
    if args.memory < *TRAINING_SWEEP.end() {
        // The training length never exceeds the channel memory.
        return Err(Failure::Config(format!(
            "--M {} is too small for the L sweep up to {}",
            args.memory,
            TRAINING_SWEEP.end()
        )));
    }

    let mut cells = Vec::new();
    for m in MEMORY_SWEEP {
        cells.push(measure("M", m, args.training_len, m, args.runs));
    }
    for l in TRAINING_SWEEP {
        cells.push(measure("L", args.memory, l, l, args.runs));
    }

    let mut table = String::from("sweep,value,states,op_count,median_s\n");
    for c in &cells {
        let _ = writeln!(
            table,
            "{},{},{},{},{:.6e}",
            c.sweep, c.value, c.states, c.op_count, c.median_s
        );
    }
    print!("{}", table);
    if let Some(path) = &args.out {
        std::fs::write(path, &table)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {}", path.display(), e)))?;
    }

    let mut failed = Vec::new();

    // Wall time linear in M: doubling the memory at fixed L may cost at
    // most 2.5x (median over the requested runs).
    let t64 = cells[0].median_s;
    let t128 = cells[1].median_s;
    let ratio = t128 / t64;
    if ratio <= 2.5 {
        println!("linear-in-M: pass - t(128)/t(64) = {:.2} <= 2.5", ratio);
    } else {
        println!("linear-in-M: FAIL - t(128)/t(64) = {:.2} > 2.5", ratio);
        failed.push("linear-in-M");
    }

    // The operation counter obeys its exact law at every cell.
    let op_law = |c: &Cell| -> u64 {
        match c.sweep {
            "M" => (c.value as u64) << args.training_len,
            _ => (args.memory as u64) << c.value,
        }
    };
    match cells.iter().find(|c| c.op_count != op_law(c)) {
        None => println!("op-counter: pass - op_count == M*2^L at every cell"),
        Some(c) => {
            println!(
                "op-counter: FAIL - {}={} has op_count {} (want {})",
                c.sweep,
                c.value,
                c.op_count,
                op_law(c)
            );
            failed.push("op-counter");
        }
    }

    // One more training symbol doubles the state space exactly.
    let l_cells: Vec<&Cell> = cells.iter().filter(|c| c.sweep == "L").collect();
    if l_cells.windows(2).all(|w| w[1].states == 2 * w[0].states) {
        println!("state-doubling: pass - states double per unit L");
    } else {
        println!("state-doubling: FAIL - state counts are not doubling");
        failed.push("state-doubling");
    }

    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "scaling contract violated: {}",
            failed.join(", ")
        )))
    }
}
