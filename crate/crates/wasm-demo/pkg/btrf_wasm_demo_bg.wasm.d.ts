/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_errormap_free: (a: number, b: number) => void;
export const demo_depth_rgba: (a: number, b: number) => [number, number, number, number];
export const demo_error_map: (a: number, b: number, c: number, d: number) => [number, number, number];
export const demo_height: (a: number) => number;
export const demo_new: (a: number, b: number, c: number) => [number, number, number];
export const demo_relocalize: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_test_views: (a: number) => number;
export const demo_train: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_view_rgba: (a: number, b: number) => [number, number, number, number];
export const demo_width: (a: number) => number;
export const errormap_inlier_rate: (a: number) => number;
export const errormap_rgba: (a: number) => [number, number];
export const ransac_trial: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
