//! Hashing-trick bag of word n-grams.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Lowercases, splits on whitespace, and counts every word n-gram
/// (`n ≤ n_max`, words joined by one space) into bucket
/// `fnv1a64(ngram) mod input_dim`. The row is scaled to unit length.
pub fn hash_features(text: &str, input_dim: usize, n_max: usize) -> Vec<f64> {
    assert!(input_dim >= 1 && n_max >= 1);
    let lower = text.to_lowercase();
    let tokens: Vec<&str> = lower.split_whitespace().collect();
    let mut row = vec![0.0; input_dim];
    for n in 1..=n_max {
        for gram in tokens.windows(n) {
            let key = gram.join(" ");
            row[(fnv1a64(key.as_bytes()) % input_dim as u64) as usize] += 1.0;
        }
    }
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        row.iter_mut().for_each(|v| *v /= norm);
    }
    row
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Featurizer {
    pub input_dim: usize,
    pub n_max: usize,
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer {
            input_dim: 4096,
            n_max: 2,
        }
    }
}

impl Featurizer {
    pub fn featurize(&self, text: &str) -> Vec<f64> {
        hash_features(text, self.input_dim, self.n_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn empty_text_is_zero() {
        assert!(hash_features("", 16, 2).iter().all(|&v| v == 0.0));
        assert!(hash_features("   \t ", 16, 2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_token_is_one_hot() {
        let row = hash_features("Laptop", 64, 2);
        let nonzero: Vec<f64> = row.iter().copied().filter(|&v| v != 0.0).collect();
        assert_eq!(nonzero, vec![1.0]);
        assert_eq!(row, hash_features("laptop", 64, 2));
    }

    #[test]
    fn deterministic_and_normalized() {
        let a = hash_features("a b", 32, 1);
        let b = hash_features("a b", 32, 1);
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let row = hash_features("red cotton shirt red shirt", 128, 2);
        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
