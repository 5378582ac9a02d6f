/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const critical_coupling: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const eigenvalue_scan: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const jump_path: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint, i: number) => [number, number, number, number];
export const ode_trajectory: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
