//! Token-shingle MinHash signatures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_64;

use crate::dataset::canonicalize;

const MERSENNE_61: u64 = (1 << 61) - 1;

fn mod_mersenne(x: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let folded = (x & p) + (x >> 61);
    let folded = (folded & p) + (folded >> 61);
    let v = folded as u64;
    if v >= MERSENNE_61 {
        v - MERSENNE_61
    } else {
        v
    }
}

/// Hashes of the `k`-token shingles of `text` (canonicalized, lowercased,
/// whitespace-tokenized), sorted and deduplicated. Texts shorter than `k`
/// tokens yield a single shingle; empty texts yield none.
pub fn shingle_hashes(text: &str, k: usize) -> Vec<u64> {
    let canon = canonicalize(text).to_lowercase();
    let tokens: Vec<&str> = canon.split(' ').filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        return Vec::new();
    }
    let k = k.max(1);
    let mut out: Vec<u64> = if tokens.len() <= k {
        vec![xxh3_64(tokens.join(" ").as_bytes())]
    } else {
        tokens
            .windows(k)
            .map(|w| xxh3_64(w.join(" ").as_bytes()))
            .collect()
    };
    out.sort_unstable();
    out.dedup();
    out
}

/// Seeded family of `h(x) = (a x + b) mod (2^61 - 1)` permutations.
#[derive(Debug, Clone)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature(Vec<u64>);

impl MinHasher {
    pub fn new(num_perm: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..num_perm)
            .map(|_| (rng.gen_range(1..MERSENNE_61), rng.gen_range(0..MERSENNE_61)))
            .collect();
        Self { coeffs }
    }

    pub fn num_perm(&self) -> usize {
        self.coeffs.len()
    }

    pub fn signature(&self, shingles: &[u64]) -> Signature {
        let mut sig = vec![u64::MAX; self.coeffs.len()];
        for &s in shingles {
            let x = (s % MERSENNE_61) as u128;
            for (slot, &(a, b)) in sig.iter_mut().zip(&self.coeffs) {
                let h = mod_mersenne(a as u128 * x + b as u128);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        Signature(sig)
    }

    pub fn text_signature(&self, text: &str, shingle_size: usize) -> Signature {
        self.signature(&shingle_hashes(text, shingle_size))
    }
}

impl Signature {
    fn is_empty_set(&self) -> bool {
        self.0.iter().all(|&v| v == u64::MAX)
    }

    /// Fraction of agreeing slots. Empty shingle sets are similar to nothing.
    pub fn similarity(&self, other: &Signature) -> f64 {
        if self.0.is_empty() || self.is_empty_set() || other.is_empty_set() {
            return 0.0;
        }
        let agree = self.0.iter().zip(&other.0).filter(|(a, b)| a == b).count();
        agree as f64 / self.0.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mod_mersenne_matches_naive() {
        for x in [0u128, 1, MERSENNE_61 as u128, (MERSENNE_61 as u128) * 3 + 7, u64::MAX as u128 * u64::MAX as u128] {
            assert_eq!(mod_mersenne(x) as u128, x % MERSENNE_61 as u128);
        }
    }

    #[test]
    fn identical_texts_agree_fully() {
        let h = MinHasher::new(64, 1);
        let a = h.text_signature("the quick brown fox jumps over the lazy dog", 3);
        let b = h.text_signature("The  quick brown fox jumps over the lazy dog ", 3);
        assert_eq!(a.similarity(&b), 1.0);
    }

    #[test]
    fn disjoint_texts_near_zero() {
        let h = MinHasher::new(128, 7);
        let a = h.text_signature("alpha beta gamma delta epsilon zeta eta theta", 2);
        let b = h.text_signature("one two three four five six seven eight", 2);
        assert!(a.similarity(&b) < 0.05);
    }

    #[test]
    fn short_and_empty_texts() {
        assert_eq!(shingle_hashes("", 5).len(), 0);
        assert_eq!(shingle_hashes("two words", 5).len(), 1);
        let h = MinHasher::new(16, 0);
        assert_eq!(h.text_signature("", 5).similarity(&h.text_signature("", 5)), 0.0);
    }

    #[test]
    fn seed_determinism() {
        let a = MinHasher::new(32, 9).text_signature("a b c d e f g", 2);
        let b = MinHasher::new(32, 9).text_signature("a b c d e f g", 2);
        assert_eq!(a, b);
    }
}
