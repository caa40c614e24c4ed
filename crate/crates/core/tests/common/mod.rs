#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use era_core::hbuild::DEFAULT_NODE_SIZE;
use era_core::{Alphabet, BuildConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Prints one result line straight to stderr (bypassing the test harness
/// capture) and fails the test if the criterion did not pass.
pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("{} criterion {criterion:>2} ({name}): {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The alphabets the randomized suites draw from: sizes 2, 4, 20 and 26.
pub fn alphabets() -> Vec<Alphabet> {
    vec![
        Alphabet::new(b"ab", b'$').unwrap(),
        Alphabet::dna(),
        Alphabet::protein(),
        Alphabet::new(b"abcdefghijklmnopqrstuvwxyz", b'$').unwrap(),
    ]
}

/// A random string of `n` base symbols drawn by one of three shapes:
/// uniform, skewed towards the first symbols, or a short period with
/// occasional mutations. The sentinel is not included.
pub fn random_text(rng: &mut ChaCha8Rng, alphabet: &Alphabet, n: usize) -> Vec<u8> {
    let base = alphabet.base_symbols();
    let k = base.len();
    match rng.gen_range(0..4) {
        0 | 1 => (0..n).map(|_| base[rng.gen_range(0..k)]).collect(),
        2 => (0..n)
            .map(|_| {
                let r: f64 = rng.gen();
                base[((r * r * r) * k as f64) as usize % k]
            })
            .collect(),
        _ => {
            let period: Vec<u8> = (0..rng.gen_range(1..=6)).map(|_| base[rng.gen_range(0..k)]).collect();
            (0..n)
                .map(|i| if rng.gen_ratio(1, 50) { base[rng.gen_range(0..k)] } else { period[i % period.len()] })
                .collect()
        }
    }
}

/// Uniform random DNA of `n` symbols written to `path` in 1 MiB chunks.
pub fn write_dna(path: &Path, n: usize, seed: u64) {
    let mut rng = rng(seed);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    let mut chunk = vec![0u8; 1 << 20];
    let mut left = n;
    while left > 0 {
        let m = left.min(chunk.len());
        for c in chunk[..m].chunks_mut(32) {
            let mut bits: u64 = rng.gen();
            for x in c {
                *x = b"ACGT"[(bits & 3) as usize];
                bits >>= 2;
            }
        }
        out.write_all(&chunk[..m]).unwrap();
        left -= m;
    }
    out.flush().unwrap();
}

/// Smallest budget whose tree share holds exactly `f_m` leaves.
pub fn memory_for(f_m: u64) -> u64 {
    (f_m * 2 * DEFAULT_NODE_SIZE * 10).div_ceil(6)
}

/// Bytes of `memory` left for the prefetch and block buffers together.
pub fn buffer_room(memory: u64) -> u64 {
    memory - (memory / 10 * 6 + memory % 10 * 6 / 10) - memory / 10
}

/// Budget giving index records exactly `f_m` leaves with the given
/// prefetch and block sizes.
pub fn config_for(f_m: u64, r_size: u64, block_size: u64) -> BuildConfig {
    let mut c = BuildConfig::new(memory_for(f_m));
    c.r_size = Some(r_size);
    c.block_size = Some(block_size);
    c
}
