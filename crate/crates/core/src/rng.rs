use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for draws that happen once per call (offsets, gamma, delays).
pub(crate) fn global(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for element `index`. Streams depend only on
/// `(seed, index)`, so per-element draws do not depend on evaluation order.
pub(crate) fn element_stream(base: &ChaCha8Rng, index: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_word_pos(0);
    rng.set_stream(index as u64 + 1);
    rng
}

/// SplitMix64 finalizer, used to derive child seeds from a parent seed and a label.
pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
