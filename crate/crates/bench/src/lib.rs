//! Synthetic inputs for the construction benchmarks.

use era_core::Alphabet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` symbols drawn uniformly from the base symbols of `alphabet`.
pub fn uniform(alphabet: &Alphabet, n: usize, seed: u64) -> Vec<u8> {
    let base = alphabet.base_symbols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| base[rng.gen_range(0..base.len())]).collect()
}

/// `n` symbols where symbol `k` has weight proportional to `skew^k`.
pub fn skewed(alphabet: &Alphabet, n: usize, skew: f64, seed: u64) -> Vec<u8> {
    let base = alphabet.base_symbols();
    let weights: Vec<f64> = (0..base.len()).map(|k| skew.powi(k as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut x = rng.gen::<f64>() * total;
            for (k, w) in weights.iter().enumerate() {
                if x < *w {
                    return base[k];
                }
                x -= w;
            }
            base[base.len() - 1]
        })
        .collect()
}

/// `word` repeated until the text holds `n` symbols.
pub fn periodic(word: &[u8], n: usize) -> Vec<u8> {
    word.iter().copied().cycle().take(n).collect()
}
