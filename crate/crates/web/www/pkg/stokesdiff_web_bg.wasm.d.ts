/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_pattern_free: (a: number, b: number) => void;
export const classify_state: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const pattern: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint, h: number) => [number, number, number];
export const pattern_half_angle: (a: number) => number;
export const pattern_large_n: (a: number) => number;
export const pattern_ratio: (a: number) => number;
export const pattern_size: (a: number) => number;
export const pattern_theta_b: (a: number) => number;
export const pattern_values: (a: number) => [number, number];
export const phase_diagram: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const thermometry_curve: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
