//! Single-medium transition kernels and free path densities.
//!
//! For a crystal grain the kernels are the explicit small-ξ formulas, valid
//! for ξ ≤ 1/2 in d = 2 and ξ ≤ 1/4 in d = 3; grain diameters are kept below
//! those bounds so every value needed along an itinerary is explicit. A
//! Poisson (disordered) grain has exponential kernels valid for every ξ.
//!
//! Notation used by the method names:
//!
//! | method            | quantity                                  |
//! |-------------------|-------------------------------------------|
//! | `transition`      | Φ₀(ξ, w, z), density of (ξ, w) given z    |
//! | `survival_w`      | Φ(ξ, w) = ∫_ξ^∞ ∫ Φ₀(η, w, z) dz dη       |
//! | `density_w`       | Φ₀(ξ, w) = ∫ Φ₀(ξ, w, z) dz               |
//! | `free_path`       | Φ(ξ), free path density for generic start |
//! | `free_path_survival` | D_Φ(ξ) = ∫_ξ^∞ Φ(η) dη                 |

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::ball::BallPoint;
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// ζ(3) (Apéry's constant).
pub const ZETA3: f64 = 1.202_056_903_159_594_3;
/// ζ(2) = π²/6.
pub const ZETA2: f64 = PI * PI / 6.0;

/// Largest ξ for which the explicit crystal kernels are served.
pub fn explicit_range(dim: usize) -> f64 {
    if dim == 2 {
        0.5
    } else {
        0.25
    }
}

const RANGE_SLACK: f64 = 1e-12;

pub fn zeta(dim: usize) -> f64 {
    if dim == 2 {
        ZETA2
    } else {
        ZETA3
    }
}

/// Volume of the unit ball in R^{d-1}: the total cross section in units of r.
pub fn sigma_bar(dim: usize) -> f64 {
    if dim == 2 {
        2.0
    } else {
        PI
    }
}

/// The clamp function 0 / x / 1.
pub fn upsilon(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Φ₀(ξ, w, z) for the square lattice in d = 2, valid for every ξ > 0.
///
/// At |w + z| = 0 the fraction is taken as +∞, -∞ or 0 according to the sign
/// of its numerator.
pub fn transition_2d(xi: f64, w: f64, z: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return invalid(format!("transition kernel needs xi > 0, got {xi}"));
    }
    if w.abs() > 1.0 + 1e-9 || z.abs() > 1.0 + 1e-9 {
        return invalid(format!(
            "impact parameters must lie in [-1, 1], got w = {w}, z = {z}"
        ));
    }
    let numerator = 1.0 / xi - w.abs().max(z.abs()) - 1.0;
    let denominator = (w + z).abs();
    let ratio = if denominator > 0.0 {
        numerator / denominator
    } else if numerator > 0.0 {
        f64::INFINITY
    } else if numerator < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    Ok(6.0 / (PI * PI) * upsilon(1.0 + ratio))
}

pub(crate) fn area_below_unchecked(t: f64) -> f64 {
    let t = t.clamp(-1.0, 1.0);
    PI - t.acos() + t * (1.0 - t * t).max(0.0).sqrt()
}

/// Area of {x ∈ B₁² : x₁ < t} for 0 ≤ t < 1.
pub fn disk_area_below(t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return invalid(format!("disk_area_below needs 0 <= t < 1, got {t}"));
    }
    Ok(area_below_unchecked(t))
}

/// The quadratic coefficient function of Φ(ξ, w) in d = 3:
///
/// G(w) = π ∫₀^{1-w} F(r/2) r dr + ∫_{1-w}^{1+w} F(r/2) arccos((w²+r²-1)/(2wr)) r dr,
///
/// equal to ½ ∫_{B²} F(‖w - z‖/2) dz. Evaluated by adaptive quadrature to
/// an absolute accuracy well below 1e-9.
pub fn area_integral(w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return invalid(format!("area_integral needs 0 <= w <= 1, got {w}"));
    }
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-14,
        max_intervals: 4000,
    };
    let inner = if w < 1.0 {
        integrate(|r| area_below_unchecked(0.5 * r) * r, 0.0, 1.0 - w, tol)?.value * PI
    } else {
        0.0
    };
    // r = 1 - w cos(φ) removes the square-root behaviour of arccos at r = 1 ± w.
    let lens = if w > 0.0 {
        integrate(
            |phi| {
                let (s, c) = phi.sin_cos();
                let r = 1.0 - w * c;
                if r <= 0.0 {
                    return 0.0;
                }
                let arg = ((w * w + r * r - 1.0) / (2.0 * w * r)).clamp(-1.0, 1.0);
                area_below_unchecked(0.5 * r) * arg.acos() * r * w * s
            },
            0.0,
            PI,
            tol,
        )?
        .value
    } else {
        0.0
    };
    Ok(inner + lens)
}

const G_TABLE_SIZE: usize = 2049;

/// Tabulated [`area_integral`] with cubic interpolation, for sampling loops.
pub fn area_integral_fast(w: f64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..G_TABLE_SIZE)
            .map(|i| {
                area_integral(i as f64 / (G_TABLE_SIZE - 1) as f64)
                    .expect("G quadrature converges on [0, 1]")
            })
            .collect()
    });
    let n = G_TABLE_SIZE - 1;
    let x = w.clamp(0.0, 1.0) * n as f64;
    let i = (x.floor() as usize).min(n - 1);
    let t = x - i as f64;
    // Catmull-Rom on the interior, linear-extrapolated ghost nodes at the ends.
    let p1 = table[i];
    let p2 = table[i + 1];
    let p0 = if i == 0 { 2.0 * p1 - p2 } else { table[i - 1] };
    let p3 = if i + 2 > n {
        2.0 * p2 - p1
    } else {
        table[i + 2]
    };
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p1
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumKind {
    Crystal,
    Poisson,
}

/// Kernel family for one medium in dimension 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelModel {
    pub medium: MediumKind,
    pub dim: usize,
    pub sigma_bar: f64,
    pub zeta: f64,
}

impl KernelModel {
    pub fn new(medium: MediumKind, dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return invalid(format!("kernels exist for d = 2 and d = 3 only, got {dim}"));
        }
        Ok(KernelModel {
            medium,
            dim,
            sigma_bar: sigma_bar(dim),
            zeta: zeta(dim),
        })
    }

    pub fn crystal(dim: usize) -> Result<Self> {
        Self::new(MediumKind::Crystal, dim)
    }

    pub fn poisson(dim: usize) -> Result<Self> {
        Self::new(MediumKind::Poisson, dim)
    }

    /// Upper end of the ξ-range where this model is served.
    pub fn xi_max(&self) -> f64 {
        match self.medium {
            MediumKind::Crystal => explicit_range(self.dim),
            MediumKind::Poisson => f64::INFINITY,
        }
    }

    /// True when Φ₀(ξ, w, z) and Φ(ξ, w) do not depend on w, z on the whole
    /// served range.
    pub fn is_parameter_free(&self) -> bool {
        self.medium == MediumKind::Poisson || self.dim == 2
    }

    fn check_xi(&self, what: &'static str, xi: f64) -> Result<f64> {
        if !(xi >= 0.0) || xi.is_infinite() && self.medium == MediumKind::Crystal {
            return invalid(format!("{what}: xi must be >= 0, got {xi}"));
        }
        let max = self.xi_max();
        if xi > max + RANGE_SLACK {
            return Err(Error::OutOfRange { what, xi, max });
        }
        Ok(xi.min(max))
    }

    fn check_param(&self, p: &BallPoint) -> Result<()> {
        if p.ambient_dim() != self.dim {
            return invalid(format!(
                "parameter {p:?} does not belong to d = {}",
                self.dim
            ));
        }
        Ok(())
    }

    /// Φ₀(ξ, w, z).
    pub fn transition(&self, xi: f64, w: &BallPoint, z: &BallPoint) -> Result<f64> {
        let xi = self.check_xi("transition kernel", xi)?;
        self.check_param(w)?;
        self.check_param(z)?;
        Ok(self.transition_unchecked(xi, w, z))
    }

    pub(crate) fn transition_unchecked(&self, xi: f64, w: &BallPoint, z: &BallPoint) -> f64 {
        match (self.medium, self.dim) {
            (MediumKind::Poisson, _) => (-self.sigma_bar * xi).exp(),
            // constant on ξ ≤ 1/2; equals transition_2d there
            (MediumKind::Crystal, 2) => 6.0 / (PI * PI),
            (MediumKind::Crystal, _) => {
                let t = 0.5 * w.dist(z);
                (1.0 - 6.0 / (PI * PI) * area_below_unchecked(t) * xi) / ZETA3
            }
        }
    }

    /// Φ(ξ, w).
    pub fn survival_w(&self, xi: f64, w: &BallPoint) -> Result<f64> {
        let xi = self.check_xi("Phi(xi, w)", xi)?;
        self.check_param(w)?;
        Ok(self.survival_w_unchecked(xi, w.norm()))
    }

    pub(crate) fn survival_w_unchecked(&self, xi: f64, w_norm: f64) -> f64 {
        match (self.medium, self.dim) {
            (MediumKind::Poisson, _) => (-self.sigma_bar * xi).exp(),
            (MediumKind::Crystal, 2) => 1.0 - 12.0 / (PI * PI) * xi,
            (MediumKind::Crystal, _) => {
                1.0 - PI / ZETA3 * xi
                    + 6.0 / (PI * PI * ZETA3) * area_integral_fast(w_norm.min(1.0)) * xi * xi
            }
        }
    }

    /// Φ₀(ξ, w) = -∂_ξ Φ(ξ, w).
    pub fn density_w(&self, xi: f64, w: &BallPoint) -> Result<f64> {
        let xi = self.check_xi("Phi_0(xi, w)", xi)?;
        self.check_param(w)?;
        Ok(self.density_w_unchecked(xi, w.norm()))
    }

    pub(crate) fn density_w_unchecked(&self, xi: f64, w_norm: f64) -> f64 {
        match (self.medium, self.dim) {
            (MediumKind::Poisson, _) => self.sigma_bar * (-self.sigma_bar * xi).exp(),
            (MediumKind::Crystal, 2) => 12.0 / (PI * PI),
            (MediumKind::Crystal, _) => {
                PI / ZETA3 - 12.0 / (PI * PI * ZETA3) * area_integral_fast(w_norm.min(1.0)) * xi
            }
        }
    }

    /// Φ(ξ), the free path density for a generic start.
    pub fn free_path(&self, xi: f64) -> Result<f64> {
        let xi = self.check_xi("Phi(xi)", xi)?;
        Ok(self.free_path_unchecked(xi))
    }

    pub(crate) fn free_path_unchecked(&self, xi: f64) -> f64 {
        match (self.medium, self.dim) {
            (MediumKind::Poisson, _) => self.sigma_bar * (-self.sigma_bar * xi).exp(),
            (MediumKind::Crystal, 2) => 2.0 - 24.0 / (PI * PI) * xi,
            (MediumKind::Crystal, _) => {
                PI - PI * PI / ZETA3 * xi + (3.0 * PI * PI + 16.0) / (2.0 * PI * ZETA3) * xi * xi
            }
        }
    }

    /// D_Φ(ξ) = 1 - ∫₀^ξ Φ.
    pub fn free_path_survival(&self, xi: f64) -> Result<f64> {
        let xi = self.check_xi("D_Phi(xi)", xi)?;
        Ok(self.free_path_survival_unchecked(xi))
    }

    pub(crate) fn free_path_survival_unchecked(&self, xi: f64) -> f64 {
        match (self.medium, self.dim) {
            (MediumKind::Poisson, _) => (-self.sigma_bar * xi).exp(),
            (MediumKind::Crystal, 2) => 1.0 - 2.0 * xi + 12.0 / (PI * PI) * xi * xi,
            (MediumKind::Crystal, _) => {
                1.0 - PI * xi + PI * PI / (2.0 * ZETA3) * xi * xi
                    - (3.0 * PI * PI + 16.0) / (6.0 * PI * ZETA3) * xi * xi * xi
            }
        }
    }

    /// max(exp(-σ̄ξ/2), exp(-ζ(d)/2)), an upper bound for D_Φ(ξ).
    pub fn tail_bound(&self, xi: f64) -> f64 {
        (-0.5 * self.sigma_bar * xi)
            .exp()
            .max((-0.5 * self.zeta).exp())
    }

    /// Supremum of Φ₀(ξ, w, z) over the served range.
    pub fn transition_sup(&self) -> f64 {
        match self.medium {
            MediumKind::Poisson => 1.0,
            MediumKind::Crystal => 1.0 / self.zeta,
        }
    }
}

/// All five Poisson kernels at ξ: (Φ₀(ξ,w,z), Φ(ξ,w), Φ₀(ξ,w), Φ(ξ), D_Φ(ξ)).
pub fn poisson_kernels(dim: usize, xi: f64) -> Result<(f64, f64, f64, f64, f64)> {
    if !(xi >= 0.0) {
        return invalid(format!("xi must be >= 0, got {xi}"));
    }
    let s = sigma_bar(dim);
    let e = (-s * xi).exp();
    Ok((e, e, s * e, s * e, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bp(c: &[f64]) -> BallPoint {
        BallPoint::new(c).unwrap()
    }

    #[test]
    fn upsilon_pieces() {
        assert_eq!(upsilon(-1.0), 0.0);
        assert_eq!(upsilon(0.5), 0.5);
        assert_eq!(upsilon(2.0), 1.0);
    }

    #[test]
    fn transition_2d_examples() {
        let c = 6.0 / (PI * PI);
        assert!((transition_2d(0.4, 0.9, -0.3).unwrap() - c).abs() < 1e-15);
        // Υ(1 + (1 - 0.5 - 1)/0.6) = 1/6
        assert!((transition_2d(1.0, 0.5, 0.1).unwrap() - 0.101_321_183_642_337_75).abs() < 1e-14);
        assert!(transition_2d(0.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn transition_2d_singular_denominator() {
        let c = 6.0 / (PI * PI);
        // numerator 1/0.4 - 0.5 - 1 > 0
        assert_eq!(transition_2d(0.4, 0.5, -0.5).unwrap(), c);
        // numerator 1/0.9 - 0.5 - 1 < 0
        assert_eq!(transition_2d(0.9, 0.5, -0.5).unwrap(), 0.0);
        // numerator 0: 1/xi = 1.5
        assert_eq!(transition_2d(1.0 / 1.5, 0.5, -0.5).unwrap(), c);
    }

    #[test]
    fn disk_area_values() {
        assert!((disk_area_below(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((disk_area_below(0.5).unwrap() - 2.527_407_804_285_415).abs() < 1e-14);
        assert!((disk_area_below(1.0 - 1e-12).unwrap() - PI).abs() < 1e-5);
        assert!(disk_area_below(1.0).is_err());
        assert!(disk_area_below(-0.1).is_err());
    }

    #[test]
    fn disk_area_matches_strip_quadrature() {
        // area = ∫_{-1}^{t} 2 sqrt(1 - x²) dx, an independent route
        for &t in &[0.0, 0.25, 0.5, 0.9] {
            let q = integrate(
                |x| 2.0 * (1.0 - x * x).max(0.0).sqrt(),
                -1.0,
                t,
                Tolerance::absolute(1e-12),
            )
            .unwrap()
            .value;
            assert!((q - disk_area_below(t).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn area_integral_endpoints() {
        let g0 = PI * (4.0 * PI + 3.0 * 3f64.sqrt()) / 16.0;
        let g1 = 5.0 * PI * PI / 16.0 + 1.0;
        assert!((area_integral(0.0).unwrap() - g0).abs() < 1e-10);
        assert!((area_integral(1.0).unwrap() - g1).abs() < 1e-10);
        assert!(area_integral(1.01).is_err());
    }

    #[test]
    fn fast_table_tracks_quadrature() {
        for i in 0..=200 {
            let w = i as f64 / 200.0 * 0.999 + 0.0007 * (i % 3) as f64;
            let w = w.min(1.0);
            let exact = area_integral(w).unwrap();
            assert!((area_integral_fast(w) - exact).abs() < 1e-10, "w = {w}");
        }
    }

    #[test]
    fn range_policy() {
        let k2 = KernelModel::crystal(2).unwrap();
        let k3 = KernelModel::crystal(3).unwrap();
        assert!(k2.free_path(0.5).is_ok());
        assert!(matches!(k2.free_path(0.51), Err(Error::OutOfRange { .. })));
        assert!(matches!(
            k3.free_path_survival(0.26),
            Err(Error::OutOfRange { .. })
        ));
        let z = bp(&[0.0, 0.0]);
        assert!(k3.transition(0.3, &z, &z).is_err());
        assert!(KernelModel::poisson(3).unwrap().free_path(40.0).is_ok());
        assert!(KernelModel::crystal(4).is_err());
    }

    #[test]
    fn free_path_examples() {
        let k2 = KernelModel::crystal(2).unwrap();
        let k3 = KernelModel::crystal(3).unwrap();
        assert_eq!(k2.free_path(0.0).unwrap(), 2.0);
        assert_eq!(k2.survival_w(0.0, &bp(&[0.3])).unwrap(), 1.0);
        assert!((k2.free_path_survival(0.5).unwrap() - 3.0 / (PI * PI)).abs() < 1e-15);
        assert_eq!(k3.free_path(0.0).unwrap(), PI);
        let v = k3.survival_w(0.25, &bp(&[1.0, 0.0])).unwrap();
        assert!((v - 0.475_719_312_559_116_5).abs() < 1e-9, "{v}");
        let t = k3
            .transition(0.25, &bp(&[0.2, 0.1]), &bp(&[0.2, 0.1]))
            .unwrap();
        assert!((t - 0.633_304_116_769_491_5).abs() < 1e-14);
    }

    #[test]
    fn poisson_family() {
        let (a, b, c, d, e) = poisson_kernels(2, 0.0).unwrap();
        assert_eq!((a, b, c, d, e), (1.0, 1.0, 2.0, 2.0, 1.0));
        let (_, _, _, _, d1) = poisson_kernels(2, 1.0).unwrap();
        assert!((d1 - 0.135_335_283_236_612_7).abs() < 1e-15);
        let mean = integrate(
            |x| x * poisson_kernels(3, x).unwrap().3,
            0.0,
            40.0,
            Tolerance::default(),
        )
        .unwrap();
        assert!((mean.value - 1.0 / PI).abs() < 1e-9);
    }

    #[test]
    fn tail_bound_example() {
        let k2 = KernelModel::crystal(2).unwrap();
        assert_eq!(k2.tail_bound(0.0), 1.0);
        assert!((k2.tail_bound(0.5) - (-0.5f64).exp()).abs() < 1e-15);
        assert!(k2.tail_bound(0.5) >= 3.0 / (PI * PI));
    }

    #[test]
    fn survival_is_antiderivative_of_density() {
        for k in [
            KernelModel::crystal(2).unwrap(),
            KernelModel::crystal(3).unwrap(),
            KernelModel::poisson(2).unwrap(),
        ] {
            let top = k.xi_max().min(2.0);
            let h = 1e-6;
            for i in 1..20 {
                let xi = top * i as f64 / 20.0;
                let fd = (k.free_path_survival(xi - h).unwrap()
                    - k.free_path_survival(xi + h).unwrap())
                    / (2.0 * h);
                assert!((fd - k.free_path(xi).unwrap()).abs() < 1e-7);
            }
        }
    }

    proptest! {
        #[test]
        fn transition_2d_is_symmetric(xi in 0.01f64..3.0, w in -1.0f64..1.0, z in -1.0f64..1.0) {
            prop_assert_eq!(transition_2d(xi, w, z).unwrap(), transition_2d(xi, z, w).unwrap());
        }

        #[test]
        fn transition_2d_constant_on_explicit_range(xi in 1e-6f64..0.5, w in -1.0f64..1.0, z in -1.0f64..1.0) {
            prop_assert!((transition_2d(xi, w, z).unwrap() - 6.0 / (PI * PI)).abs() < 1e-12);
        }

        #[test]
        fn transition_3d_bracket(xi in 0.0f64..0.25, a in 0.0f64..1.0, b in 0.0f64..6.3, c in 0.0f64..1.0, d in 0.0f64..6.3) {
            let k = KernelModel::crystal(3).unwrap();
            let w = bp(&[a * b.cos(), a * b.sin()]);
            let z = bp(&[c * d.cos(), c * d.sin()]);
            let v = k.transition(xi, &w, &z).unwrap();
            prop_assert!(v <= 1.0 / ZETA3 + 1e-15);
            prop_assert!(v >= (1.0 - 4.0 * PI * xi) / ZETA3 - 1e-15);
        }

        #[test]
        fn small_xi_remainder_nonnegative(xi in 0.0f64..1.0) {
            for dim in [2usize, 3] {
                let k = KernelModel::crystal(dim).unwrap();
                let xi = xi * k.xi_max();
                let linear = k.sigma_bar - k.sigma_bar * k.sigma_bar / k.zeta * xi;
                prop_assert!(k.free_path(xi).unwrap() - linear >= -1e-12);
                prop_assert!(k.free_path_survival(xi).unwrap() <= k.tail_bound(xi));
            }
        }
    }
}
