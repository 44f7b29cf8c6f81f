//! Seeded random streams and the elementary samplers.
//!
//! Every particle or sample draws from its own ChaCha8 stream selected by
//! (seed, index), so results do not depend on how work is split between
//! threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ball::BallPoint;
use crate::Vector;

pub type StreamRng = ChaCha8Rng;

/// The random stream for work item `index` of a run seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform direction on the unit sphere.
pub fn uniform_sphere<const D: usize, R: Rng + ?Sized>(rng: &mut R) -> Vector<D> {
    loop {
        let g = Vector::<D>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 1e-12 {
            return g / n;
        }
    }
}

/// Uniform point of the closed unit ball in R^{d-1}.
pub fn uniform_ball<const D: usize, R: Rng + ?Sized>(rng: &mut R) -> BallPoint {
    if D == 2 {
        BallPoint::unchecked(&[rng.random_range(-1.0..1.0)]).expect("one component")
    } else {
        let rho = rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        BallPoint::unchecked(&[rho * phi.cos(), rho * phi.sin()]).expect("two components")
    }
}

/// Uniform point of the box [lo, hi).
pub fn uniform_box<const D: usize, R: Rng + ?Sized>(
    rng: &mut R,
    lo: &Vector<D>,
    hi: &Vector<D>,
) -> Vector<D> {
    Vector::<D>::from_fn(|i, _| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>())
}

/// Uniform variate in the open interval (0, 1).
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| substream(5, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| substream(5, 3).random()).collect();
        assert_eq!(a, b);
        let mut r1 = substream(5, 3);
        let mut r2 = substream(5, 4);
        assert_ne!(r1.random::<u64>(), r2.random::<u64>());
    }

    #[test]
    fn sphere_moments() {
        let mut rng = substream(1, 0);
        let n = 200_000;
        let mut m = Vector::<3>::zeros();
        let mut q = 0.0;
        for _ in 0..n {
            let v: Vector<3> = uniform_sphere(&mut rng);
            m += v;
            q += v[0] * v[0];
        }
        assert!((m / n as f64).norm() < 0.01);
        assert!((q / n as f64 - 1.0 / 3.0).abs() < 0.005);
    }

    #[test]
    fn disk_radius_law() {
        let mut rng = substream(2, 0);
        let n = 100_000;
        let inside = (0..n)
            .filter(|_| uniform_ball::<3, _>(&mut rng).norm() < 0.5)
            .count();
        assert!((inside as f64 / n as f64 - 0.25).abs() < 0.01);
    }
}
