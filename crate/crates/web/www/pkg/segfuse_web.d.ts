/* tslint:disable */
/* eslint-disable */

/**
 * Phantom, corrupted raters and their STAPLE fusion.
 */
export class FusionDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Dice of each panel against the truth for `region` (0 ET, 1 TC, 2 WT).
     */
    dice(region: number): Float64Array;
    /**
     * Distance (mm) from each voxel of slice `z` to the panel's `region`,
     * as a heat map clipped at `max_mm`. Region voxels are drawn white.
     */
    distanceRgba(panel: number, region: number, z: number, max_mm: number): Uint8Array;
    /**
     * HD95 in mm of each panel against the truth for `region`.
     */
    hd95(region: number): Float64Array;
    /**
     * Builds a `size`^3 phantom with `raters` copies corrupted at `rate`,
     * then fuses them. Panels: truth, each rater, fused.
     */
    constructor(size: number, raters: number, rate: number, seed: number);
    panelCount(): number;
    size(): number;
    /**
     * Axial slice `z` of panel `panel`: intensity with the labels on top.
     */
    sliceRgba(panel: number, z: number): Uint8Array;
}

/**
 * Stitching weight accumulated over a 2-D sliding-window plan.
 */
export class TilingDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * A `width` x `height` image tiled with square patches.
     */
    constructor(width: number, height: number, patch: number, stride: number, gaussian: boolean);
    /**
     * Smallest and largest summed weight over the image.
     */
    range(): Float64Array;
    /**
     * Summed window weight per pixel, normalised to the maximum, with
     * window outlines drawn over it.
     */
    rgba(): Uint8Array;
    windowCount(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_fusiondemo_free: (a: number, b: number) => void;
    readonly __wbg_tilingdemo_free: (a: number, b: number) => void;
    readonly fusiondemo_dice: (a: number, b: number) => [number, number];
    readonly fusiondemo_distanceRgba: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly fusiondemo_hd95: (a: number, b: number) => [number, number];
    readonly fusiondemo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly fusiondemo_panelCount: (a: number) => number;
    readonly fusiondemo_size: (a: number) => number;
    readonly fusiondemo_sliceRgba: (a: number, b: number, c: number) => [number, number];
    readonly tilingdemo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly tilingdemo_range: (a: number) => [number, number];
    readonly tilingdemo_rgba: (a: number) => [number, number];
    readonly tilingdemo_windowCount: (a: number) => number;
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
