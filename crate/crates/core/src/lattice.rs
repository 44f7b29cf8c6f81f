//! Affine unimodular lattices (Z^d + ω)M, exact commensurability on rational
//! input, and enumeration of lattice points in thin tubes.

use nalgebra::DMatrix;
use num::{BigInt, BigRational, One, Signed, Zero};

use crate::error::{invalid, Error, Result};
use crate::{Matrix, Vector};

const DET_TOL: f64 = 1e-12;

/// A real multiple of a rational matrix, `scale · rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalForm {
    pub scale: f64,
    pub rows: Vec<Vec<BigRational>>,
}

impl RationalForm {
    /// Parses rows of `"p/q"` or integer strings.
    pub fn parse(rows: &[Vec<String>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse_rational(s))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RationalForm { scale: 1.0, rows })
    }

    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn to_f64(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.scale * rational_to_f64(&self.rows[i][j]))
    }
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s, "1"),
    };
    let p: BigInt = p
        .parse()
        .map_err(|_| Error::Config(format!("not an exact rational: {s:?}")))?;
    let q: BigInt = q
        .parse()
        .map_err(|_| Error::Config(format!("not an exact rational: {s:?}")))?;
    if q.is_zero() {
        return Err(Error::Config(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(p, q))
}

fn rational_to_f64(x: &BigRational) -> f64 {
    use num::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact inverse and determinant by Gauss-Jordan elimination.
fn rational_inverse(a: &[Vec<BigRational>]) -> Option<(Vec<Vec<BigRational>>, BigRational)> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            r
        })
        .collect();
    let mut det = BigRational::one();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col].clone();
        det *= &p;
        for x in m[col].iter_mut() {
            *x = &*x / &p;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                for (x, y) in m[r].iter_mut().zip(pivot_row.iter()) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some((m.into_iter().map(|r| r[n..].to_vec()).collect(), det))
}

fn rational_mul(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(BigRational::zero(), |acc, k| acc + &a[i][k] * &b[k][j]))
                .collect()
        })
        .collect()
}

pub(crate) fn determinant<const D: usize>(m: &Matrix<D>) -> f64 {
    nalgebra::DMatrix::from_column_slice(D, D, m.as_slice()).determinant()
}

/// The affine lattice {(k + ω)M : k ∈ Z^d}, with M of determinant one.
/// Points are row vectors in the usual convention; here they are stored
/// and returned as columns, p = Mᵀ(k + ω).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLattice<const D: usize> {
    m: Matrix<D>,
    omega: Vector<D>,
    exact: Option<RationalForm>,
}

impl<const D: usize> AffineLattice<D> {
    pub fn new(m: Matrix<D>, omega: Vector<D>) -> Result<Self> {
        let det = determinant(&m);
        if !((det - 1.0).abs() <= DET_TOL) {
            return invalid(format!("lattice matrix must have determinant 1, got {det}"));
        }
        if !omega.iter().all(|w| w.is_finite()) {
            return invalid("lattice offset must be finite");
        }
        Ok(AffineLattice {
            m,
            omega,
            exact: None,
        })
    }

    pub fn integer(omega: Vector<D>) -> Self {
        AffineLattice {
            m: Matrix::identity(),
            omega,
            exact: Some(identity_form(D)),
        }
    }

    /// Builds M = c·R from an exact rational R. With `normalize`, c is
    /// det(R)^{-1/d}; otherwise c = 1 and det R must already be 1.
    pub fn from_rational(form: RationalForm, normalize: bool, omega: Vector<D>) -> Result<Self> {
        if form.dim() != D || form.rows.iter().any(|r| r.len() != D) {
            return invalid(format!("rational lattice matrix must be {D}×{D}"));
        }
        let (_, det) = rational_inverse(&form.rows)
            .ok_or_else(|| Error::InvalidInput("singular lattice matrix".into()))?;
        let mut form = form;
        form.scale = if normalize {
            if !det.is_positive() {
                return invalid("rational lattice matrix must have positive determinant");
            }
            rational_to_f64(&det).powf(-1.0 / D as f64)
        } else {
            1.0
        };
        let dm = form.to_f64();
        let m = Matrix::<D>::from_fn(|i, j| dm[(i, j)]);
        let mut lat = Self::new(m, omega)?;
        lat.exact = Some(form);
        Ok(lat)
    }

    /// Returns the lattice (Z^d + ω)MK for a rotation K (right action).
    /// The exact form is lost unless K is the identity.
    pub fn rotated(&self, k: &Matrix<D>) -> Result<Self> {
        let mut out = Self::new(self.m * k, self.omega)?;
        if *k == Matrix::<D>::identity() {
            out.exact = self.exact.clone();
        }
        Ok(out)
    }

    pub fn with_omega(&self, omega: Vector<D>) -> Self {
        AffineLattice {
            omega,
            ..self.clone()
        }
    }

    pub fn matrix(&self) -> &Matrix<D> {
        &self.m
    }

    pub fn omega(&self) -> &Vector<D> {
        &self.omega
    }

    pub fn exact_form(&self) -> Option<&RationalForm> {
        self.exact.as_ref()
    }

    /// The point (k + ω)M.
    pub fn point(&self, k: &[i64; D]) -> Vector<D> {
        let y = Vector::<D>::from_fn(|i, _| k[i] as f64 + self.omega[i]);
        self.m.transpose() * y
    }
}

fn identity_form(d: usize) -> RationalForm {
    RationalForm {
        scale: 1.0,
        rows: (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if i == j {
                            BigRational::one()
                        } else {
                            BigRational::zero()
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}

/// The body-centred cubic lattice matrix, determinant one.
pub fn bcc_matrix() -> Matrix<3> {
    let a = 2f64.powf(1.0 / 3.0);
    let b = 2f64.powf(-2.0 / 3.0);
    Matrix::<3>::new(a, 0.0, 0.0, 0.0, a, 0.0, b, b, b)
}

/// Rotation of the plane by `angle`, acting on row vectors from the right.
pub fn rotation_2d(angle: f64) -> Matrix<2> {
    let (s, c) = angle.sin_cos();
    Matrix::<2>::new(c, s, -s, c)
}

/// Rotation of R³ about `axis` by `angle` (right action on row vectors).
pub fn rotation_3d(axis: &Vector<3>, angle: f64) -> Result<Matrix<3>> {
    let n = axis.norm();
    if !(n > 0.0) {
        return invalid("rotation axis must be nonzero");
    }
    let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(axis / n), angle);
    Ok(r.matrix().transpose())
}

/// Whether M₁M₂⁻¹ lies in the commensurator of SL(d, Z), i.e. equals
/// (det T)^{-1/d}·T for a rational T with det T > 0.
///
/// Decided exactly when both lattices carry a rational form. For such input
/// the quotient is always a real multiple of the rational matrix
/// T = R₁R₂⁻¹, possibly after T → -T to fix the sign of the determinant, so
/// the answer is true; floating-point matrices give [`Error::Undecidable`].
pub fn is_commensurable<const D: usize>(
    a: &AffineLattice<D>,
    b: &AffineLattice<D>,
) -> Result<bool> {
    let (fa, fb) = match (a.exact_form(), b.exact_form()) {
        (Some(fa), Some(fb)) => (fa, fb),
        _ => {
            return Err(Error::Undecidable(
                "both lattice matrices need an exact rational representation; \
                 set assume_incommensurable to assert incommensurability"
                    .into(),
            ))
        }
    };
    let (inv_b, _) = rational_inverse(&fb.rows)
        .ok_or_else(|| Error::InvalidInput("singular lattice matrix".into()))?;
    let t = rational_mul(&fa.rows, &inv_b);
    let (_, det_t) =
        rational_inverse(&t).ok_or_else(|| Error::InvalidInput("singular quotient".into()))?;
    // λ^d det T = 1 must hold for the unimodular pair; a mismatch means the
    // stored scales do not describe M₁, M₂.
    let lambda = fa.scale / fb.scale;
    let check = lambda.powi(D as i32) * rational_to_f64(&det_t);
    if (check - 1.0).abs() > 1e-9 {
        return invalid(format!(
            "rational forms are inconsistent with det = 1 (λ^d det T = {check})"
        ));
    }
    // For det T < 0 (odd d) the quotient is |λ|·(-T) with det(-T) > 0.
    Ok(true)
}

/// Scatterer centres anchor + ε(Z^d + ω)M of one grain.
#[derive(Debug, Clone)]
pub struct ScaledGrainLattice<const D: usize> {
    lattice: AffineLattice<D>,
    epsilon: f64,
    anchor: Vector<D>,
    // column map k + ω ↦ p - anchor and its inverse
    a: Matrix<D>,
    a_inv: Matrix<D>,
    row_norms: [f64; D],
}

impl<const D: usize> ScaledGrainLattice<D> {
    pub fn new(lattice: AffineLattice<D>, epsilon: f64, anchor: Vector<D>) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return invalid(format!("epsilon must be positive, got {epsilon}"));
        }
        let a = lattice.matrix().transpose() * epsilon;
        let a_inv = a
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("singular lattice matrix".into()))?;
        let mut row_norms = [0.0; D];
        for (i, n) in row_norms.iter_mut().enumerate() {
            *n = a_inv.row(i).norm();
        }
        Ok(ScaledGrainLattice {
            lattice,
            epsilon,
            anchor,
            a,
            a_inv,
            row_norms,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn anchor(&self) -> &Vector<D> {
        &self.anchor
    }

    pub fn lattice(&self) -> &AffineLattice<D> {
        &self.lattice
    }

    pub fn point(&self, k: &[i64; D]) -> Vector<D> {
        let y = Vector::<D>::from_fn(|i, _| k[i] as f64 + self.lattice.omega()[i]);
        self.anchor + self.a * y
    }

    /// Continuous lattice coordinates of `p`, so that p = point(k) iff the
    /// result equals k.
    pub fn coordinates(&self, p: &Vector<D>) -> Vector<D> {
        self.a_inv * (p - self.anchor) - self.lattice.omega()
    }

    /// All lattice points within distance `radius` of the segment
    /// x + [t0, t1]v.
    pub fn points_in_tube(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        t0: f64,
        t1: f64,
        radius: f64,
    ) -> Result<Vec<Vector<D>>> {
        if !(t0 >= 0.0 && t1 > t0) || !(radius > 0.0) {
            return invalid(format!(
                "tube needs 0 <= t0 < t1 and radius > 0, got [{t0}, {t1}], {radius}"
            ));
        }
        let mut out = Vec::new();
        self.visit_tube(x, v, t0, t1, radius, |p| out.push(p));
        Ok(out)
    }

    /// Calls `f` for every lattice point within `radius` of x + [t0, t1]v
    /// (unchecked arguments; used by the ray tracer).
    pub fn visit_tube(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        t0: f64,
        t1: f64,
        radius: f64,
        mut f: impl FnMut(Vector<D>),
    ) {
        let y0 = self.coordinates(x);
        let u = self.a_inv * v;
        let h: [f64; D] = std::array::from_fn(|i| radius * self.row_norms[i] + 1e-9);
        // slab axis: the coordinate that moves fastest relative to the tube width
        let j = (0..D)
            .max_by(|&a, &b| (u[a].abs() / h[a]).total_cmp(&(u[b].abs() / h[b])))
            .expect("D >= 1");
        let (ya, yb) = (y0[j] + t0 * u[j], y0[j] + t1 * u[j]);
        let kj_lo = (ya.min(yb) - h[j]).ceil() as i64;
        let kj_hi = (ya.max(yb) + h[j]).floor() as i64;
        let mut lo = [0i64; D];
        let mut hi = [0i64; D];
        let mut k = [0i64; D];
        for kj in kj_lo..=kj_hi {
            let (sa, sb) = if u[j] != 0.0 {
                let p = (kj as f64 - y0[j] - h[j]) / u[j];
                let q = (kj as f64 - y0[j] + h[j]) / u[j];
                (p.min(q).max(t0), p.max(q).min(t1))
            } else {
                (t0, t1)
            };
            if sa > sb {
                continue;
            }
            let mut empty = false;
            for i in 0..D {
                if i == j {
                    lo[i] = kj;
                    hi[i] = kj;
                    continue;
                }
                let (ca, cb) = (y0[i] + sa * u[i], y0[i] + sb * u[i]);
                lo[i] = (ca.min(cb) - h[i]).ceil() as i64;
                hi[i] = (ca.max(cb) + h[i]).floor() as i64;
                empty |= lo[i] > hi[i];
            }
            if empty {
                continue;
            }
            k.copy_from_slice(&lo);
            'odometer: loop {
                let p = self.point(&k);
                let rel = p - x;
                let s = rel.dot(v).clamp(t0, t1);
                if (rel - v * s).norm_squared() <= radius * radius {
                    f(p);
                }
                for i in 0..D {
                    if i == j {
                        continue;
                    }
                    if k[i] < hi[i] {
                        k[i] += 1;
                        continue 'odometer;
                    }
                    k[i] = lo[i];
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn brute_force<const D: usize>(
        sgl: &ScaledGrainLattice<D>,
        x: &Vector<D>,
        v: &Vector<D>,
        t0: f64,
        t1: f64,
        radius: f64,
    ) -> Vec<Vector<D>> {
        // enumerate a generous coordinate box around the segment
        let a = sgl.coordinates(&(x + v * t0));
        let b = sgl.coordinates(&(x + v * t1));
        let pad = 3 + (radius / sgl.epsilon() * 4.0).ceil() as i64;
        let lo: [i64; D] = std::array::from_fn(|i| a[i].min(b[i]).floor() as i64 - pad);
        let hi: [i64; D] = std::array::from_fn(|i| a[i].max(b[i]).ceil() as i64 + pad);
        let mut out = Vec::new();
        let mut k = lo;
        'outer: loop {
            let p = sgl.point(&k);
            let rel = p - x;
            let s = rel.dot(v).clamp(t0, t1);
            if (rel - v * s).norm() <= radius {
                out.push(p);
            }
            for i in 0..D {
                if k[i] < hi[i] {
                    k[i] += 1;
                    continue 'outer;
                }
                k[i] = lo[i];
            }
            break;
        }
        out
    }

    fn sorted<const D: usize>(mut v: Vec<Vector<D>>) -> Vec<Vector<D>> {
        v.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        v
    }

    #[test]
    fn bcc_has_unit_determinant() {
        let m = bcc_matrix();
        assert!((m.determinant() - 1.0).abs() < 1e-14);
        assert!((m[(0, 0)] - 1.259_921_049_894_873_2).abs() < 1e-15);
        let k = rotation_3d(&Vector::<3>::new(1.0, 2.0, -0.5), 0.7).unwrap();
        assert!(((m * k).determinant() - 1.0).abs() < 1e-13);
        assert!(AffineLattice::new(m, Vector::<3>::zeros()).is_ok());
    }

    #[test]
    fn rejects_non_unimodular() {
        assert!(AffineLattice::new(Matrix::<2>::identity() * 1.1, Vector::<2>::zeros()).is_err());
    }

    #[test]
    fn commensurability_examples() {
        let id = AffineLattice::<2>::integer(Vector::<2>::zeros());
        assert!(is_commensurable(&id, &id).unwrap());
        let rows = vec![
            vec!["4/5".to_string(), "3/5".into()],
            vec!["-3/5".into(), "4/5".into()],
        ];
        let rot = AffineLattice::from_rational(
            RationalForm::parse(&rows).unwrap(),
            false,
            Vector::<2>::zeros(),
        )
        .unwrap();
        assert!(is_commensurable(&id, &rot).unwrap());
        let float = id.rotated(&rotation_2d(1.0)).unwrap();
        assert!(matches!(
            is_commensurable(&id, &float),
            Err(Error::Undecidable(_))
        ));
    }

    #[test]
    fn normalized_rational_form() {
        let rows = vec![
            vec!["2".to_string(), "1".into()],
            vec!["0".into(), "3".into()],
        ];
        let lat = AffineLattice::from_rational(
            RationalForm::parse(&rows).unwrap(),
            true,
            Vector::<2>::zeros(),
        )
        .unwrap();
        assert!((lat.matrix().determinant() - 1.0).abs() < 1e-13);
        let id = AffineLattice::<2>::integer(Vector::<2>::zeros());
        assert!(is_commensurable(&lat, &id).unwrap());
        assert!(RationalForm::parse(&[vec!["1/0".to_string()]]).is_err());
        assert!(RationalForm::parse(&[vec!["0.5".to_string()]]).is_err());
    }

    #[test]
    fn axis_aligned_tube() {
        let sgl = ScaledGrainLattice::new(
            AffineLattice::<2>::integer(Vector::<2>::zeros()),
            0.1,
            Vector::<2>::zeros(),
        )
        .unwrap();
        let pts = sgl
            .points_in_tube(
                &Vector::<2>::zeros(),
                &Vector::<2>::new(1.0, 0.0),
                0.0,
                1.0,
                0.05,
            )
            .unwrap();
        let pts = sorted(pts);
        assert_eq!(pts.len(), 11);
        for (k, p) in pts.iter().enumerate() {
            assert!((p[0] - 0.1 * k as f64).abs() < 1e-12 && p[1].abs() < 1e-12);
        }
        let none = sgl
            .points_in_tube(
                &Vector::<2>::new(0.0, 0.05),
                &Vector::<2>::new(1.0, 0.0),
                0.0,
                1.0,
                0.04,
            )
            .unwrap();
        assert!(none.is_empty());
        assert!(ScaledGrainLattice::new(
            AffineLattice::<2>::integer(Vector::<2>::zeros()),
            0.0,
            Vector::<2>::zeros()
        )
        .is_err());
    }

    #[test]
    fn reanchoring_by_lattice_vector_keeps_points() {
        let lat = AffineLattice::<2>::integer(Vector::<2>::new(0.3, 0.7))
            .rotated(&rotation_2d(0.4))
            .unwrap();
        let eps = 0.05;
        let s1 = ScaledGrainLattice::new(lat.clone(), eps, Vector::<2>::new(0.1, 0.2)).unwrap();
        let shift = lat.matrix().transpose() * Vector::<2>::new(3.0, -2.0) * eps;
        let s2 = ScaledGrainLattice::new(lat, eps, Vector::<2>::new(0.1, 0.2) + shift).unwrap();
        let x = Vector::<2>::new(-0.3, 0.4);
        let v = Vector::<2>::new(0.6, 0.8);
        let a = sorted(s1.points_in_tube(&x, &v, 0.0, 2.0, 0.02).unwrap());
        let b = sorted(s2.points_in_tube(&x, &v, 0.0, 2.0, 0.02).unwrap());
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn tube_matches_brute_force_2d(angle in 0.0f64..2.0 * PI, rot in 0.0f64..PI, ox in 0.0f64..1.0, oy in 0.0f64..1.0,
                                       t0 in 0.0f64..0.5, len in 0.01f64..1.0, radius in 0.001f64..0.04) {
            let lat = AffineLattice::<2>::integer(Vector::<2>::new(ox, oy)).rotated(&rotation_2d(rot)).unwrap();
            let sgl = ScaledGrainLattice::new(lat, 0.07, Vector::<2>::new(0.2, -0.1)).unwrap();
            let x = Vector::<2>::new(0.13, 0.31);
            let v = Vector::<2>::new(angle.cos(), angle.sin());
            let fast = sorted(sgl.points_in_tube(&x, &v, t0, t0 + len, radius).unwrap());
            let slow = sorted(brute_force(&sgl, &x, &v, t0, t0 + len, radius));
            prop_assert_eq!(fast.len(), slow.len());
            for (p, q) in fast.iter().zip(&slow) {
                prop_assert!((p - q).norm() < 1e-12);
            }
        }

        #[test]
        fn tube_matches_brute_force_3d(th in 0.0f64..PI, ph in 0.0f64..2.0 * PI, ax in -1.0f64..1.0, ang in 0.0f64..3.0,
                                       t0 in 0.0f64..0.3, len in 0.01f64..0.6, radius in 0.002f64..0.05) {
            let k = rotation_3d(&Vector::<3>::new(ax, 0.5, 1.0 - ax.abs()), ang).unwrap();
            let lat = AffineLattice::new(bcc_matrix(), Vector::<3>::new(0.1, 0.5, 0.9)).unwrap().rotated(&k).unwrap();
            let sgl = ScaledGrainLattice::new(lat, 0.08, Vector::<3>::zeros()).unwrap();
            let x = Vector::<3>::new(0.01, -0.2, 0.05);
            let v = Vector::<3>::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
            let fast = sorted(sgl.points_in_tube(&x, &v, t0, t0 + len, radius).unwrap());
            let slow = sorted(brute_force(&sgl, &x, &v, t0, t0 + len, radius));
            prop_assert_eq!(fast.len(), slow.len());
            for (p, q) in fast.iter().zip(&slow) {
                prop_assert!((p - q).norm() < 1e-12);
            }
        }
    }
}
