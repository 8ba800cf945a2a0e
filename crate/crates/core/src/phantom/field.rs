use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::Mask;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Knot spacing of the boundary displacement fields, in pixels.
const SPACING: f64 = 4.0;

/// Smooth 1-D random displacement: Gaussian values on a regular knot grid,
/// linearly interpolated, clamped beyond the ends.
#[derive(Debug, Clone)]
pub(crate) struct Field1d {
    lo: f64,
    values: Vec<f64>,
}

impl Field1d {
    pub(crate) fn random(rng: &mut ChaCha8Rng, lo: f64, hi: f64, sigma: f64) -> Self {
        let n = ((hi - lo) / SPACING).ceil() as usize + 1;
        let values = if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("sigma is positive");
            (0..n).map(|_| normal.sample(rng)).collect()
        } else {
            vec![0.0; n]
        };
        Self { lo, values }
    }

    pub(crate) fn at(&self, x: f64) -> f64 {
        let t = ((x - self.lo) / SPACING).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.values.len().saturating_sub(2));
        if self.values.len() == 1 {
            return self.values[0];
        }
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

/// Flips every pixel independently with probability `p`.
pub(crate) fn speckle(rng: &mut ChaCha8Rng, m: &mut Mask, p: f64) {
    for r in 0..m.height() {
        for c in 0..m.width() {
            if rng.random_bool(p) {
                let v = m.get(r, c);
                m.set(r, c, !v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_flat() {
        let f = Field1d::random(&mut rng(1), 0.0, 50.0, 0.0);
        assert!((0..60).all(|x| f.at(x as f64) == 0.0));
    }

    #[test]
    fn interpolates_between_knots() {
        let f = Field1d {
            lo: 0.0,
            values: vec![0.0, 4.0, 0.0],
        };
        assert_eq!(f.at(2.0), 2.0);
        assert_eq!(f.at(4.0), 4.0);
        assert_eq!(f.at(6.0), 2.0);
        assert_eq!(f.at(100.0), 0.0);
        assert_eq!(f.at(-3.0), 0.0);
    }
}
