/* tslint:disable */
/* eslint-disable */

/**
 * Draw one seeded instance and run all four estimators on it.
 *
 * Returns a JSON document with the true channel, the noisy observation,
 * both Cramér-Rao bounds, and per-algorithm taps, detected support, squared
 * error, and (where applicable) iteration counts and objective traces.
 */
export function run_instance(memory: number, sparsity: number, training_len: number, snr_db: number, seed: bigint): string;

/**
 * Run a small Monte Carlo sweep in the browser.
 *
 * `snr_csv` is a comma-separated dB grid (at most 13 points) and
 * `algos_csv` a comma-separated subset of `lse,slse,omp,omapfg`. Trials are
 * capped at 50 per point to keep the page responsive. The records match the
 * native CLI bit-for-bit at the same configuration, except that wall-clock
 * times read zero (the sandbox exposes no monotonic clock).
 */
export function sweep_snr(memory: number, sparsity: number, training_len: number, trials: number, seed: bigint, snr_csv: string, algos_csv: string): string;

/**
 * Run exact MAP support detection on one small seeded instance and expose
 * the full min-sum lattice.
 *
 * The quadratic form is built from the least-squares tap estimate — exactly
 * what the alternating estimator computes on its first iteration — and the
 * result is cross-checked against the exhaustive 2^M oracle.
 */
export function trellis_trace(memory: number, sparsity: number, training_len: number, snr_db: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly run_instance: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly sweep_snr: (a: number, b: number, c: number, d: number, e: bigint, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly trellis_trace: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
