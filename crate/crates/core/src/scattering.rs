//! Hard-sphere scattering: the frame K(v), specular reflection, impact and
//! exit parameters, and the differential cross section.
//!
//! Row-vector products wK are computed as Kᵀw on columns.

use crate::ball::BallPoint;
use crate::error::{invalid, Result};
use crate::{Matrix, Vector};

/// A rotation K with vK = e₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame<const D: usize> {
    pub v: Vector<D>,
    pub k: Matrix<D>,
}

impl<const D: usize> Frame<D> {
    /// Rotation in the (v, e₁) plane; at v = −e₁ the fixed fallback
    /// diag(−1, −1, 1, …) is used.
    pub fn new(v: &Vector<D>) -> Frame<D> {
        let c = v[0];
        let k = if 1.0 + c <= 1e-12 {
            let mut k = Matrix::<D>::identity();
            k[(0, 0)] = -1.0;
            k[(1, 1)] = -1.0;
            k
        } else {
            let mut e1 = Vector::<D>::zeros();
            e1[0] = 1.0;
            let w = e1 * v.transpose() - v * e1.transpose();
            let r = Matrix::<D>::identity() + w + w * w / (1.0 + c);
            r.transpose()
        };
        Frame { v: *v, k }
    }

    /// wK as a column.
    pub fn to_frame(&self, w: &Vector<D>) -> Vector<D> {
        self.k.transpose() * w
    }

    /// Inverse of [`Frame::to_frame`].
    pub fn from_frame(&self, u: &Vector<D>) -> Vector<D> {
        self.k * u
    }

    /// (wK)_⊥, the last d − 1 frame coordinates.
    pub fn perp(&self, w: &Vector<D>) -> BallPoint {
        let u = self.to_frame(w);
        BallPoint::unchecked(&u.as_slice()[1..]).expect("d is 2 or 3")
    }

    /// The unit vector u with (uK)_⊥ = p and first frame coordinate
    /// `sign`·√(1 − |p|²).
    pub fn lift(&self, p: &BallPoint, sign: f64) -> Vector<D> {
        let mut u = Vector::<D>::zeros();
        u[0] = sign * (1.0 - p.norm().powi(2)).max(0.0).sqrt();
        for (i, c) in p.as_slice().iter().enumerate() {
            u[i + 1] = *c;
        }
        self.from_frame(&u)
    }
}

/// v₊ = v − 2(v·w)w.
pub fn reflect<const D: usize>(v: &Vector<D>, w: &Vector<D>) -> Result<Vector<D>> {
    let vw = v.dot(w);
    if !(vw < 0.0) {
        return invalid(format!("reflection needs v·w < 0, got {vw}"));
    }
    Ok(reflect_unchecked(v, w))
}

pub(crate) fn reflect_unchecked<const D: usize>(v: &Vector<D>, w: &Vector<D>) -> Vector<D> {
    let out = v - w * (2.0 * v.dot(w));
    out / out.norm()
}

fn chord_direction<const D: usize>(from: &Vector<D>, to: &Vector<D>) -> Result<Vector<D>> {
    let d = to - from;
    let n = d.norm();
    if !(n > 1e-14) {
        return invalid("velocities before and after a collision must differ");
    }
    Ok(d / n)
}

/// Impact point w on the unit sphere with reflect(v, w) = v₊.
pub fn impact_point<const D: usize>(v: &Vector<D>, v_plus: &Vector<D>) -> Result<Vector<D>> {
    chord_direction(v, v_plus)
}

/// b = (wK(v))_⊥ for the impact point w of the collision v → v₊.
pub fn impact_param<const D: usize>(v: &Vector<D>, v_plus: &Vector<D>) -> Result<BallPoint> {
    Ok(Frame::new(v).perp(&impact_point(v, v_plus)?))
}

/// s = (w′K(v))_⊥, where w′ is the sphere point at which the previous
/// collision (v_prev → v) took place.
pub fn exit_param<const D: usize>(v: &Vector<D>, v_prev: &Vector<D>) -> Result<BallPoint> {
    Ok(Frame::new(v).perp(&chord_direction(v_prev, v)?))
}

/// The impact point on the unit sphere for impact parameter b.
pub fn impact_from_param<const D: usize>(frame: &Frame<D>, b: &BallPoint) -> Vector<D> {
    frame.lift(b, -1.0)
}

/// Outgoing velocity for incoming v and impact parameter b.
pub fn scatter<const D: usize>(frame: &Frame<D>, b: &BallPoint) -> Vector<D> {
    let w = impact_from_param(frame, b);
    reflect_unchecked(&frame.v, &w)
}

/// σ(v, v₊) = 2^{1−d}(‖v − v₊‖/2)^{3−d}, the Jacobian of b ↦ v₊.
pub fn cross_section<const D: usize>(v: &Vector<D>, v_plus: &Vector<D>) -> f64 {
    let d = D as i32;
    2f64.powi(1 - d) * (0.5 * (v - v_plus).norm()).powi(3 - d)
}
