use std::fmt;

use crate::error::{invalid, Result};

/// A point of the closed unit ball in R^{d-1}, used for impact and exit
/// parameters. Only d = 2 and d = 3 are supported, so at most two
/// components are stored.
#[derive(Clone, Copy, PartialEq)]
pub struct BallPoint {
    len: usize,
    c: [f64; 2],
}

/// Slack allowed on the unit-norm constraint.
const NORM_SLACK: f64 = 1e-9;

impl BallPoint {
    pub fn new(components: &[f64]) -> Result<Self> {
        let p = Self::unchecked(components)?;
        if !(p.norm() <= 1.0 + NORM_SLACK) {
            return invalid(format!(
                "impact/exit parameter {p:?} lies outside the unit ball"
            ));
        }
        Ok(p)
    }

    /// Builds the point without the norm check (dimension is still checked).
    pub fn unchecked(components: &[f64]) -> Result<Self> {
        match components.len() {
            1 | 2 => {
                let mut c = [0.0; 2];
                c[..components.len()].copy_from_slice(components);
                Ok(BallPoint {
                    len: components.len(),
                    c,
                })
            }
            n => invalid(format!(
                "impact/exit parameters have d - 1 = 1 or 2 components, got {n}"
            )),
        }
    }

    pub fn origin(dim: usize) -> Result<Self> {
        match dim {
            2 | 3 => Ok(BallPoint {
                len: dim - 1,
                c: [0.0; 2],
            }),
            _ => invalid(format!("dimension must be 2 or 3, got {dim}")),
        }
    }

    /// Ambient dimension d of the phase space this parameter belongs to.
    pub fn ambient_dim(&self) -> usize {
        self.len + 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.len]
    }

    pub fn norm(&self) -> f64 {
        self.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dist(&self, other: &BallPoint) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn neg(&self) -> BallPoint {
        BallPoint {
            len: self.len,
            c: [-self.c[0], -self.c[1]],
        }
    }

    pub fn add(&self, other: &BallPoint) -> BallPoint {
        BallPoint {
            len: self.len,
            c: [self.c[0] + other.c[0], self.c[1] + other.c[1]],
        }
    }

    /// Applies the (d-1)×(d-1) orthogonal matrix `r` from the right.
    pub fn rotate(&self, r: &[[f64; 2]; 2]) -> BallPoint {
        match self.len {
            1 => BallPoint {
                len: 1,
                c: [self.c[0] * r[0][0], 0.0],
            },
            _ => BallPoint {
                len: 2,
                c: [
                    self.c[0] * r[0][0] + self.c[1] * r[1][0],
                    self.c[0] * r[0][1] + self.c[1] * r[1][1],
                ],
            },
        }
    }
}

impl fmt::Debug for BallPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_outside_and_bad_dims() {
        assert!(BallPoint::new(&[1.2]).is_err());
        assert!(BallPoint::new(&[0.8, 0.8]).is_err());
        assert!(BallPoint::new(&[]).is_err());
        assert!(BallPoint::new(&[0.1, 0.1, 0.1]).is_err());
        assert!(BallPoint::new(&[1.0]).is_ok());
    }

    #[test]
    fn origin_matches_dimension() {
        assert_eq!(BallPoint::origin(2).unwrap().as_slice(), &[0.0]);
        assert_eq!(BallPoint::origin(3).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(BallPoint::origin(4).is_err());
    }

    #[test]
    fn rotation_preserves_norm() {
        let p = BallPoint::new(&[0.3, -0.4]).unwrap();
        let (s, c) = 0.7f64.sin_cos();
        let q = p.rotate(&[[c, s], [-s, c]]);
        assert!((q.norm() - 0.5).abs() < 1e-15);
    }
}
