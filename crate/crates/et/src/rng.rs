//! Seeded randomness helpers.
//!
//! All randomness in the crate flows from explicit 64-bit seeds through one of
//! two generators: a ChaCha stream for data generation and shuffling, and a
//! stateless counter-based generator for dropout masks. Both are bit-stable
//! across runs and platforms.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic stream RNG for sampling worlds, templates and data order.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent child seed from a parent seed and a stream label.
/// Used to hand each subsystem (world gen, templates, init, ...) its own
/// stream without coupling their draw counts.
pub fn derive(seed: u64, label: &str) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform f64 in [0, 1).
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal via Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = (uniform(rng)).max(1e-300);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform index in [0, n).
pub fn index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    (rng.next_u64() % n as u64) as usize
}

/// Splittable counter-based generator for dropout masks.
///
/// The stream is a pure function of (key, counter): forward passes that run
/// concurrently or in a different order still draw identical masks for
/// identical (key, position) pairs.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    /// Fork an independent stream; children never collide with the parent.
    pub fn split(&self, label: u64) -> CounterRng {
        CounterRng {
            key: splitmix(self.key ^ label.wrapping_mul(0xd6e8_feb8_6659_fd93)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = splitmix(self.key ^ self.counter.wrapping_mul(0xa076_1d64_78bd_642f));
        self.counter += 1;
        v
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable_and_label_sensitive() {
        assert_eq!(derive(7, "world"), derive(7, "world"));
        assert_ne!(derive(7, "world"), derive(7, "lang"));
        assert_ne!(derive(7, "world"), derive(8, "world"));
    }

    #[test]
    fn counter_rng_is_order_free() {
        let mut a = CounterRng::new(42);
        let first: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let mut b = CounterRng::new(42);
        let again: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_eq!(first, again);
        let c = b.split(1);
        let mut d = b.split(1);
        assert_eq!(c.key, d.key);
        assert_ne!(d.next_u64(), first[0]);
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut rng = seeded(3);
        for _ in 0..1000 {
            let u = uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
