//! Shared helpers: a deterministic stream of generator configurations
//! covering a spread of corpus shapes and sizes.

#![allow(dead_code)]

use cfi_surface::generate::{GeneratorConfig, TypeWeights};

/// Deterministic config for `seed`, mixing corpus sizes: mostly small
/// programs, every 10th medium, every 100th at the large bound
/// (200 classes / 2000 callsites).
pub fn corpus_config(seed: u64) -> GeneratorConfig {
    // Cheap seed scrambler (splitmix64 round) so parameters do not
    // correlate with the seed's low bits.
    let mut x = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut next = move || {
        x ^= x >> 30;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 27;
        x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
        x
    };
    let (n_classes, n_free, n_callsites) = if seed.is_multiple_of(100) {
        (200, 120, 2000)
    } else if seed.is_multiple_of(10) {
        (40 + (next() % 61) as u32, (next() % 80) as u32, 300 + (next() % 501) as u32)
    } else {
        (1 + (next() % 30) as u32, (next() % 30) as u32, (next() % 121) as u32)
    };
    GeneratorConfig {
        seed,
        n_classes,
        n_free_functions: n_free,
        n_callsites,
        max_bases: 1 + (next() % 3) as u32,
        p_override: (next() % 101) as f64 / 100.0,
        p_virtual_callsite: 0.3 + (next() % 71) as f64 / 100.0,
        max_params: 8,
        arity_weights: vec![18, 25, 20, 15, 10, 6, 3, 2, 1],
        type_weights: TypeWeights {
            primitive: 6,
            pointer: 3,
            named: 2,
        },
    }
}
