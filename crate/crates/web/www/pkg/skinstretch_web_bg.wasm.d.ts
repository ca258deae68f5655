/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_grid_free: (a: number, b: number) => void;
export const __wbg_patch_free: (a: number, b: number) => void;
export const __wbg_stretch_free: (a: number, b: number) => void;
export const grid_max: (a: number) => number;
export const grid_min: (a: number) => number;
export const grid_nx: (a: number) => number;
export const grid_ny: (a: number) => number;
export const grid_spacing: (a: number) => number;
export const grid_values: (a: number) => [number, number];
export const patch_height: (a: number) => number;
export const patch_offset: (a: number) => number;
export const patch_support: (a: number) => number;
export const stretch: (a: number, b: number, c: number, d: number) => [number, number, number];
export const stretch_report: (a: number) => [number, number];
export const stretch_residual: (a: number) => number;
export const stretch_sigma_x: (a: number) => number;
export const stretch_sigma_y: (a: number) => number;
export const synthesize: (a: number, b: number) => [number, number, number];
export const wrinkles: (a: number, b: number, c: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
