/* tslint:disable */
/* eslint-disable */

/**
 * Inclined crack under uniaxial compression on a coarse mesh. Returns rows
 * of `[ξ, t_N, t_N exact, |g_T|, |g_T| exact]` flattened, sorted by `ξ`.
 */
export function fracture(psi_deg: number, phi_deg: number, h: number): Float64Array;

/**
 * Inf-sup constants of a tied cube pair with `n1³` non-mortar and `n2³`
 * mortar cells: `[β* plain, β* stabilized, λmin/λmax plain, λmin/λmax
 * stabilized, kernel dimension of S]`.
 */
export function infsup(n1: number, n2: number): Float64Array;

/**
 * Normal and shear traction along the vertical fault of the two-block model
 * at `step` with the fault held in stick. `multipliers` is "p0" or "nodal".
 * Returns `[z…, t_N…, t_shear…]` as three equal-length runs.
 */
export function twoblock(multipliers: string, stabilized: boolean, step: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly fracture: (a: number, b: number, c: number) => [number, number, number, number];
    readonly infsup: (a: number, b: number) => [number, number, number, number];
    readonly twoblock: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
