//! Space-filling initial designs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
    109, 113, 127, 131,
];

/// `n` points of a Halton sequence in `[0, 1)^dim` with a random digit
/// permutation per dimension and digit position.
pub fn scrambled_halton(n: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if dim > PRIMES.len() {
        return Err(Error::Unsupported(format!("Halton designs support at most {} dimensions", PRIMES.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Vec<Vec<u64>>> = PRIMES[..dim]
        .iter()
        .map(|&b| {
            let n_digits = (52.0 / (b as f64).log2()).ceil() as usize;
            (0..n_digits)
                .map(|_| {
                    let mut p: Vec<u64> = (0..b).collect();
                    p.shuffle(&mut rng);
                    p
                })
                .collect()
        })
        .collect();
    Ok((1..=n as u64)
        .map(|i| {
            PRIMES[..dim]
                .iter()
                .zip(&perms)
                .map(|(&b, digit_perms)| {
                    let mut k = i;
                    let mut scale = 1.0 / b as f64;
                    let mut v = 0.0;
                    for p in digit_perms {
                        v += p[(k % b) as usize] as f64 * scale;
                        k /= b;
                        scale /= b as f64;
                    }
                    v.min(1.0 - f64::EPSILON)
                })
                .collect()
        })
        .collect())
}
