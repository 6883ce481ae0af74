//! Seeded, counter-addressed random streams.
//!
//! Every consumer asks for a `(seed, stream)` pair; ChaCha's block counter
//! makes each stream independent of how many values other streams drew, so
//! results do not depend on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal deviates written into `out`.
pub fn fill_normal(rng: &mut StreamRng, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
}

/// Uniform point on `S^{n-1}`, by normalizing a standard normal vector.
pub fn unit_vector(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    loop {
        fill_normal(rng, &mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}
