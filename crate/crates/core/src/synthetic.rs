//! Samplers for the synthetic distributions used in simulations.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::PointSet;

/// `n` draws from `U[lo, hi]`, as 1-D points. Samplers panic on `n == 0`.
pub fn uniform_interval<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> PointSet {
    let values: Vec<f64> = (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
    PointSet::from_flat(values, 1).expect("n and dim must be positive")
}

/// `n` draws from the unit box `[0,1]^d`.
pub fn uniform_box<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> PointSet {
    let values: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    PointSet::from_flat(values, dim).expect("n and dim must be positive")
}

/// `n` draws uniform on the unit sphere `S^(d-1)` in `R^d`.
pub fn uniform_sphere<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> PointSet {
    let mut values = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let v = loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        values.extend(v);
    }
    PointSet::from_flat(values, dim).expect("n and dim must be positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn ranges() {
        let mut rng = substream(1, 0);
        let s = uniform_interval(500, 0.3, 1.3, &mut rng);
        assert!(s.as_flat().iter().all(|&v| (0.3..=1.3).contains(&v)));
        let b = uniform_box(100, 4, &mut rng);
        assert_eq!((b.len(), b.dim()), (100, 4));
        assert!(b.as_flat().iter().all(|&v| (0.0..1.0).contains(&v)));
        let sp = uniform_sphere(50, 12, &mut rng);
        for row in sp.rows() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
