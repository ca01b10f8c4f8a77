//! Seeded random streams. Every chain owns one `ChaCha8Rng`, seeded from a
//! pure function of its coordinates so cells never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_str(s: &str) -> u64 {
    // FNV-1a, stable across platforms and toolchains.
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives a child seed from a parent seed and a sequence of labels.
pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    labels
        .iter()
        .fold(mix(master), |acc, label| mix(acc ^ hash_str(label)))
}

/// Seed for a single experiment cell.
pub fn cell_seed(master: u64, dataset: &str, method: &str, repetition: usize) -> u64 {
    derive_seed(master, &[dataset, method, &repetition.to_string()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_pure_and_separates_cells() {
        let a = cell_seed(7, "two_modes", "gibbs", 0);
        assert_eq!(a, cell_seed(7, "two_modes", "gibbs", 0));
        assert_ne!(a, cell_seed(7, "two_modes", "gibbs", 1));
        assert_ne!(a, cell_seed(7, "two_modes", "hmc", 0));
        assert_ne!(a, cell_seed(8, "two_modes", "gibbs", 0));
        // Label boundaries matter.
        assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
    }

    #[test]
    fn derivation_is_frozen() {
        // Changing this breaks replay of previously published runs.
        assert_eq!(derive_seed(0, &[]), mix(0));
        assert_eq!(mix(0), 0xE220_A839_7B1D_CDAF);
    }
}
