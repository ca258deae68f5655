/* tslint:disable */
/* eslint-disable */

/**
 * Row-major grid with +y rows stored bottom first; NaN marks masked nodes.
 */
export class Grid {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Largest finite value, 0 for an all-masked grid.
     */
    max(): number;
    /**
     * Smallest finite value, 0 for an all-masked grid.
     */
    min(): number;
    readonly nx: number;
    readonly ny: number;
    readonly spacing: number;
    readonly values: Float64Array;
}

export class Patch {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly height: Grid;
    /**
     * How far the smooth contour was lowered (mm).
     */
    readonly offset: number;
    /**
     * Support contour sampled on the same grid.
     */
    readonly support: Grid;
}

export class Stretch {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Case report as JSON.
     */
    readonly report: string;
    /**
     * Residual wrinkle depth (mm).
     */
    readonly residual: Grid;
    /**
     * Pa
     */
    readonly sigma_x: Grid;
    /**
     * Pa
     */
    readonly sigma_y: Grid;
}

export function stretch(seed: number, ld: number, dfs: number, speed: number): Stretch;

export function synthesize(seed: number, noise: number): Patch;

export function wrinkles(seed: number, noise: number, threshold: number): Grid;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_grid_free: (a: number, b: number) => void;
    readonly __wbg_patch_free: (a: number, b: number) => void;
    readonly __wbg_stretch_free: (a: number, b: number) => void;
    readonly grid_max: (a: number) => number;
    readonly grid_min: (a: number) => number;
    readonly grid_nx: (a: number) => number;
    readonly grid_ny: (a: number) => number;
    readonly grid_spacing: (a: number) => number;
    readonly grid_values: (a: number) => [number, number];
    readonly patch_height: (a: number) => number;
    readonly patch_offset: (a: number) => number;
    readonly patch_support: (a: number) => number;
    readonly stretch: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly stretch_report: (a: number) => [number, number];
    readonly stretch_residual: (a: number) => number;
    readonly stretch_sigma_x: (a: number) => number;
    readonly stretch_sigma_y: (a: number) => number;
    readonly synthesize: (a: number, b: number) => [number, number, number];
    readonly wrinkles: (a: number, b: number, c: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
