/* tslint:disable */
/* eslint-disable */

/**
 * Spiral classifier handle for the page.
 */
export class Spiral {
    free(): void;
    [Symbol.dispose](): void;
    accuracy(): number;
    alpha(): number;
    decisionGrid(res: number): Uint8Array;
    gamma(): number;
    labels(): Uint8Array;
    constructor(kind: string, per_arm: number, learning_rate: number, seed: number);
    points(): Float64Array;
    steps(): number;
    /**
     * Trains for `steps` updates and returns the loss.
     */
    train(steps: number): number;
    /**
     * Flattened `(alpha, gamma)` history.
     */
    trajectory(): Float64Array;
}

export function activationCurve(kind: string, alpha: number, gamma: number, lo: number, hi: number, points: number): Float64Array;

export function gradientReport(instances: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_spiral_free: (a: number, b: number) => void;
    readonly activationCurve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly gradientReport: (a: number, b: number) => [number, number, number, number];
    readonly spiral_accuracy: (a: number) => [number, number, number];
    readonly spiral_alpha: (a: number) => number;
    readonly spiral_decisionGrid: (a: number, b: number) => [number, number, number, number];
    readonly spiral_gamma: (a: number) => number;
    readonly spiral_labels: (a: number) => [number, number];
    readonly spiral_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly spiral_points: (a: number) => [number, number];
    readonly spiral_steps: (a: number) => number;
    readonly spiral_train: (a: number, b: number) => [number, number, number];
    readonly spiral_trajectory: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
