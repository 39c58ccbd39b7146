/* @ts-self-types="./stokesdiff_web.d.ts" */

/**
 * A square image in row-major order, lowest `k_y` first.
 */
export class Pattern {
    static __wrap(ptr) {
        const obj = Object.create(Pattern.prototype);
        obj.__wbg_ptr = ptr;
        PatternFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        PatternFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_pattern_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get half_angle() {
        const ret = wasm.pattern_half_angle(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get large_n() {
        const ret = wasm.pattern_large_n(this.__wbg_ptr);
        return ret;
    }
    /**
     * `(I(0) - I(θ_b)) / I(θ_b)` from a 360-point ring.
     * @returns {number}
     */
    get ratio() {
        const ret = wasm.pattern_ratio(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get size() {
        const ret = wasm.pattern_size(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get theta_b() {
        const ret = wasm.pattern_theta_b(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Float64Array}
     */
    values() {
        const ret = wasm.pattern_values(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
}
if (Symbol.dispose) Pattern.prototype[Symbol.dispose] = Pattern.prototype.free;

/**
 * Verdict and margins for one state, as a short text block.
 * @param {number} n_atoms
 * @param {number} ns_mean
 * @param {number} ns_var
 * @param {number} pair_sum
 * @returns {string}
 */
export function classify_state(n_atoms, ns_mean, ns_var, pair_sum) {
    let deferred2_0;
    let deferred2_1;
    try {
        const ret = wasm.classify_state(n_atoms, ns_mean, ns_var, pair_sum);
        var ptr1 = ret[0];
        var len1 = ret[1];
        if (ret[3]) {
            ptr1 = 0; len1 = 0;
            throw takeFromExternrefTable0(ret[2]);
        }
        deferred2_0 = ptr1;
        deferred2_1 = len1;
        return getStringFromWasm0(ptr1, len1);
    } finally {
        wasm.__wbindgen_free(deferred2_0, deferred2_1, 1);
    }
}

/**
 * Collective pattern of a 2D Gaussian cloud at 780 nm, out to three
 * boundary angles.
 * @param {number} n_atoms
 * @param {number} ns_mean
 * @param {number} ns_var
 * @param {number} pair_sum
 * @param {number} fwhm_um
 * @param {number} size
 * @param {bigint} seed
 * @param {boolean} averaged
 * @returns {Pattern}
 */
export function pattern(n_atoms, ns_mean, ns_var, pair_sum, fwhm_um, size, seed, averaged) {
    const ret = wasm.pattern(n_atoms, ns_mean, ns_var, pair_sum, fwhm_um, size, seed, averaged);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return Pattern.__wrap(ret[0]);
}

/**
 * Label codes over `ΔN_s² ∈ [0, max]` (rows) by `P ∈ [-N/2, N(N-1)/p_scale]`
 * (columns). Codes follow `PhaseLabel::code`.
 * @param {number} n_atoms
 * @param {number} ns_mean
 * @param {number} rows
 * @param {number} cols
 * @param {number} p_scale
 * @returns {Uint8Array}
 */
export function phase_diagram(n_atoms, ns_mean, rows, cols, p_scale) {
    const ret = wasm.phase_diagram(n_atoms, ns_mean, rows, cols, p_scale);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
    return v1;
}

/**
 * Interleaved `[τ₁, S]` pairs followed by the fitted temperature (K).
 * @param {number} n_atoms
 * @param {number} temperature_uk
 * @param {number} tau_max_ms
 * @param {number} points
 * @param {bigint} seed
 * @returns {Float64Array}
 */
export function thermometry_curve(n_atoms, temperature_uk, tau_max_ms, points, seed) {
    const ret = wasm.thermometry_curve(n_atoms, temperature_uk, tau_max_ms, points, seed);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v1;
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg_Error_30c8987f7c2ed4e2: function(arg0, arg1) {
            const ret = Error(getStringFromWasm0(arg0, arg1));
            return ret;
        },
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./stokesdiff_web_bg.js": import0,
    };
}

const PatternFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_pattern_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

function getArrayU8FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint8ArrayMemory0().subarray(ptr / 1, ptr / 1 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('stokesdiff_web_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
