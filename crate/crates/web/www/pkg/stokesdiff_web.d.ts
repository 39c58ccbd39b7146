/* tslint:disable */
/* eslint-disable */

/**
 * A square image in row-major order, lowest `k_y` first.
 */
export class Pattern {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    values(): Float64Array;
    readonly half_angle: number;
    readonly large_n: number;
    /**
     * `(I(0) - I(θ_b)) / I(θ_b)` from a 360-point ring.
     */
    readonly ratio: number;
    readonly size: number;
    readonly theta_b: number;
}

/**
 * Verdict and margins for one state, as a short text block.
 */
export function classify_state(n_atoms: number, ns_mean: number, ns_var: number, pair_sum: number): string;

/**
 * Collective pattern of a 2D Gaussian cloud at 780 nm, out to three
 * boundary angles.
 */
export function pattern(n_atoms: number, ns_mean: number, ns_var: number, pair_sum: number, fwhm_um: number, size: number, seed: bigint, averaged: boolean): Pattern;

/**
 * Label codes over `ΔN_s² ∈ [0, max]` (rows) by `P ∈ [-N/2, N(N-1)/p_scale]`
 * (columns). Codes follow `PhaseLabel::code`.
 */
export function phase_diagram(n_atoms: number, ns_mean: number, rows: number, cols: number, p_scale: number): Uint8Array;

/**
 * Interleaved `[τ₁, S]` pairs followed by the fitted temperature (K).
 */
export function thermometry_curve(n_atoms: number, temperature_uk: number, tau_max_ms: number, points: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_pattern_free: (a: number, b: number) => void;
    readonly classify_state: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly pattern: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint, h: number) => [number, number, number];
    readonly pattern_half_angle: (a: number) => number;
    readonly pattern_large_n: (a: number) => number;
    readonly pattern_ratio: (a: number) => number;
    readonly pattern_size: (a: number) => number;
    readonly pattern_theta_b: (a: number) => number;
    readonly pattern_values: (a: number) => [number, number];
    readonly phase_diagram: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly thermometry_curve: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
