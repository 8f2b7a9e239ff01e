/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_spiral_free: (a: number, b: number) => void;
export const activationCurve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const gradientReport: (a: number, b: number) => [number, number, number, number];
export const spiral_accuracy: (a: number) => [number, number, number];
export const spiral_alpha: (a: number) => number;
export const spiral_decisionGrid: (a: number, b: number) => [number, number, number, number];
export const spiral_gamma: (a: number) => number;
export const spiral_labels: (a: number) => [number, number];
export const spiral_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const spiral_points: (a: number) => [number, number];
export const spiral_steps: (a: number) => number;
export const spiral_train: (a: number, b: number) => [number, number, number];
export const spiral_trajectory: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
