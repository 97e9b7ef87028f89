/* tslint:disable */
/* eslint-disable */

/**
 * Composite capture of the given shifts/powers/offsets, first reception of band 0.
 */
export function despread_spectrum(shifts: string, powers_dbfs: string, offsets: string, snr_db: number, seed_value: bigint): string;

/**
 * Two UEs on shifts 0 and 4, the second `delta` samples late and
 * `gap_db` weaker. Window positions are relative to the first UE's CP start.
 */
export function metric_trace(delta: number, gap_db: number, snr_db: number, seed_value: bigint): string;

/**
 * Full simulated mission on a preset ("rural" or "urban").
 */
export function run_mission(preset: string, seed_value: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly despread_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly metric_trace: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly run_mission: (a: number, b: number, c: bigint) => [number, number, number, number];
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
