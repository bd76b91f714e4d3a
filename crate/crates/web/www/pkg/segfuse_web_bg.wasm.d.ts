/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_fusiondemo_free: (a: number, b: number) => void;
export const __wbg_tilingdemo_free: (a: number, b: number) => void;
export const fusiondemo_dice: (a: number, b: number) => [number, number];
export const fusiondemo_distanceRgba: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const fusiondemo_hd95: (a: number, b: number) => [number, number];
export const fusiondemo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const fusiondemo_panelCount: (a: number) => number;
export const fusiondemo_size: (a: number) => number;
export const fusiondemo_sliceRgba: (a: number, b: number, c: number) => [number, number];
export const tilingdemo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const tilingdemo_range: (a: number) => [number, number];
export const tilingdemo_rgba: (a: number) => [number, number];
export const tilingdemo_windowCount: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
