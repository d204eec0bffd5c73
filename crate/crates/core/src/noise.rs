//! Reproducible Brownian increments.
//!
//! Each path owns a ChaCha8 stream selected by `(master_seed, path_index)`, so the
//! increment sequence of a path is independent of thread scheduling and of how many
//! other paths run alongside it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Vector;

#[derive(Debug, Clone)]
pub struct NoiseStream<const K: usize> {
    rng: ChaCha8Rng,
    master_seed: u64,
    path_index: u64,
    dt: f64,
    sqrt_dt: f64,
}

impl<const K: usize> NoiseStream<K> {
    pub fn new(master_seed: u64, path_index: u64, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        Self {
            rng,
            master_seed,
            path_index,
            dt,
            sqrt_dt: dt.sqrt(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn standard_normals(&mut self) -> Vector<K> {
        Vector::<K>::from_fn(|_, _| StandardNormal.sample(&mut self.rng))
    }

    /// ΔB over one base step: N(0, dt·I_k).
    pub fn next_increment(&mut self) -> Vector<K> {
        self.standard_normals() * self.sqrt_dt
    }

    /// ΔB over a step of length `h` (used for a shortened final step).
    pub fn next_increment_over(&mut self, h: f64) -> Vector<K> {
        self.standard_normals() * h.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_identical() {
        let mut a = NoiseStream::<2>::new(42, 7, 1e-3);
        let mut b = NoiseStream::<2>::new(42, 7, 1e-3);
        for _ in 0..1000 {
            assert_eq!(a.next_increment(), b.next_increment());
        }
    }

    #[test]
    fn paths_and_seeds_differ() {
        let first = |seed, path| NoiseStream::<1>::new(seed, path, 1.0).next_increment()[0];
        assert_ne!(first(1, 0), first(1, 1));
        assert_ne!(first(1, 0), first(2, 0));
    }

    #[test]
    fn increments_have_variance_dt() {
        let dt = 0.01;
        let mut s = NoiseStream::<3>::new(3, 0, dt);
        let n = 40_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let w = s.next_increment();
            sum += w.sum();
            sq += w.norm_squared();
        }
        let count = (3 * n) as f64;
        let mean = sum / count;
        let var = sq / count;
        // sd of the variance estimate is dt·sqrt(2/count) ≈ 4e-5
        assert!(mean.abs() < 5.0 * (dt / count).sqrt());
        assert!((var - dt).abs() < 2e-4, "variance {var}");
    }
}
