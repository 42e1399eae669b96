/* tslint:disable */
/* eslint-disable */

/**
 * Profit and loss of the three trading methods on a seeded drifting market.
 */
export function backtest_compare(n: number, seed: number, threshold_margin: number): string;

/**
 * Forecast error histogram over `n` seeded synthetic blocks.
 */
export function batch_histogram(n: number, seed: number, model: string, grid_size: number, beta: number): string;

/**
 * Minimizer surface and target function for one option, from a JSON
 * [`SurfaceRequest`].
 */
export function solve_surface(request_json: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly backtest_compare: (a: number, b: number, c: number) => [number, number];
    readonly batch_histogram: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly solve_surface: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
