//! Deterministic feature-hashing embedder.
//!
//! Each token `t` of [`tokenize`] contributes `±1` to bucket
//! `XXH64(t, BUCKET_SEED) mod dim`, with `+1` when `XXH64(t, SIGN_SEED)` is
//! even and `-1` otherwise. XXH64 is specified bit-for-bit, so the output is
//! identical across runs and platforms.

use xxhash_rust::xxh64::xxh64;

use super::matrix::l2_normalize;
use crate::dataset::tokenize;

pub const BUCKET_SEED: u64 = 0x5EED_0000_0000_0001;
pub const SIGN_SEED: u64 = 0x5EED_0000_0000_0002;

pub fn bucket_of(token: &str, dim: usize) -> usize {
    (xxh64(token.as_bytes(), BUCKET_SEED) % dim as u64) as usize
}

pub fn sign_of(token: &str) -> f32 {
    if xxh64(token.as_bytes(), SIGN_SEED).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Panics if `dim == 0`; callers validate `dim >= 2` through the config.
pub fn mock_embed(text: &str, dim: usize, normalize: bool) -> Vec<f32> {
    assert!(dim > 0, "mock_embed needs a positive dimension");
    let mut v = vec![0.0f32; dim];
    for tok in tokenize(text) {
        v[bucket_of(tok, dim)] += sign_of(tok);
    }
    if normalize {
        l2_normalize(&mut v);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nonzero(v: &[f32]) -> Vec<usize> {
        v.iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    #[test]
    fn empty_text_is_zero_vector() {
        assert_eq!(mock_embed("", 8, false), vec![0.0; 8]);
        assert_eq!(mock_embed("  ;; ", 8, true), vec![0.0; 8]);
    }

    #[test]
    fn repeated_token_accumulates() {
        let v = mock_embed("x x x", 8, false);
        let nz = nonzero(&v);
        assert_eq!(nz.len(), 1);
        assert_eq!(v[nz[0]].abs(), 3.0);
        assert_eq!(nz[0], bucket_of("x", 8));
        assert_eq!(v[nz[0]], 3.0 * sign_of("x"));
    }

    #[test]
    fn two_tokens_in_distinct_buckets() {
        // Choose a dimension where the two tokens hash apart, then check the
        // vector has exactly those two buckets set.
        let dim = (8..64).find(|&d| bucket_of("x", d) != bucket_of("y", d)).unwrap();
        let v = mock_embed("x y", dim, false);
        let mut expected = vec![bucket_of("x", dim), bucket_of("y", dim)];
        expected.sort();
        assert_eq!(nonzero(&v), expected);
    }

    #[test]
    fn a_and_b_differ_at_dim_8() {
        assert_ne!(mock_embed("a", 8, false), mock_embed("b", 8, false));
    }

    #[test]
    fn pinned_hash_values() {
        // Guards against accidental changes to the hashing rule.
        assert_eq!(xxh64(b"", 0), 0xef46db3751d8e999);
        assert_eq!((bucket_of("y", 8), sign_of("y")), (3, 1.0));
        assert_eq!((bucket_of("a", 8), sign_of("a")), (0, -1.0));
        assert_eq!((bucket_of("b", 8), sign_of("b")), (1, -1.0));
        assert_eq!((bucket_of("def", 8), sign_of("def")), (5, -1.0));
    }

    #[test]
    fn normalized_rows_have_unit_norm() {
        let v = mock_embed("int main ( void ) { return 0 ; }", 32, true);
        let n: f32 = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-4);
    }
}
