/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * RGBA depth visualization of test view `index`.
     */
    depth_rgba(index: number): Uint8Array;
    /**
     * World-coordinate error map of test view `index` at leaf budget
     * `n_max`, sampled every `stride` pixels.
     */
    error_map(index: number, n_max: number, stride: number): ErrorMap;
    height(): number;
    /**
     * Renders `train_views` training and `test_views` test views of the
     * room generated from `scene_seed`.
     */
    constructor(scene_seed: number, train_views: number, test_views: number);
    /**
     * Relocalizes test view `index`; returns JSON with the pose errors.
     */
    relocalize(index: number, n_max: number, query_budget: number): string;
    test_views(): number;
    /**
     * Trains the forest; returns a JSON summary of tree sizes.
     */
    train(trees: number, balanced_depth_limit: number, pixels_per_view: number): string;
    /**
     * RGBA pixels of test view `index`.
     */
    view_rgba(index: number): Uint8Array;
    width(): number;
}

export class ErrorMap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Fraction of predictions within 10 cm.
     */
    inlier_rate(): number;
    rgba(): Uint8Array;
}

/**
 * Preemptive RANSAC on `count` 3D-3D correspondences of which a fraction
 * `outlier_ratio` are random; returns JSON with the outcome.
 */
export function ransac_trial(count: number, outlier_ratio: number, noise_m: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_errormap_free: (a: number, b: number) => void;
    readonly demo_depth_rgba: (a: number, b: number) => [number, number, number, number];
    readonly demo_error_map: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_height: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_relocalize: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_test_views: (a: number) => number;
    readonly demo_train: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_view_rgba: (a: number, b: number) => [number, number, number, number];
    readonly demo_width: (a: number) => number;
    readonly errormap_inlier_rate: (a: number) => number;
    readonly errormap_rgba: (a: number) => [number, number];
    readonly ransac_trial: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
