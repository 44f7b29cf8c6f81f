//! Polycrystal limit densities as products over the itinerary.
//!
//! With ℓ_μ the length of the μ-th segment and i_μ its grain:
//!
//! * Ψ(x, v, ξ) = ∏_{μ<ν} D_Φ(ℓ_μ) · Φ(ξ − ℓ_ν⁻) for ξ in segment ν;
//! * Ψ(x, v, ξ, w) replaces the last factor by Φ(ξ − ℓ_ν⁻, w);
//! * Ψ₀(x, v, ξ, w, z) is Φ₀(ξ, w, z) inside the first segment and
//!   Φ(ℓ₁, z) ∏_{2≤μ<ν} D_Φ(ℓ_μ) Φ(ξ − ℓ_ν⁻, w) afterwards, and vanishes
//!   unless x is in a grain (or on its boundary, pointing inwards);
//! * Ψ₀(x, v, ξ, z) is the w-integral of Ψ₀(x, v, ξ, w, z).
//!
//! Every factor uses the kernels of the grain it belongs to.

use crate::ball::BallPoint;
use crate::error::{invalid, Result};
use crate::geometry::{Medium, Scene, Segment};
use crate::kernels::{sigma_bar, zeta, KernelModel, MediumKind};
use crate::quadrature::{integrate_ball, Tolerance};
use crate::Vector;

/// Survival below this is reported as zero, ending long periodic walks.
const NEGLIGIBLE: f64 = 1e-17;

/// Itinerary walk result for a given ξ.
#[derive(Debug, Clone, Copy)]
struct Located<const D: usize> {
    index: usize,
    segment: Segment<D>,
    prefix: f64,
}

/// Limit densities on a scene.
#[derive(Debug, Clone)]
pub struct PolyKernel<const D: usize> {
    scene: Scene<D>,
    models: Vec<KernelModel>,
}

impl<const D: usize> PolyKernel<D> {
    pub fn new(scene: Scene<D>) -> Result<Self> {
        scene.check_kernel_range()?;
        let models = scene
            .media()
            .iter()
            .map(|m| match m {
                Medium::Crystal(_) => KernelModel::crystal(D),
                Medium::Poisson => KernelModel::poisson(D),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyKernel { scene, models })
    }

    pub fn scene(&self) -> &Scene<D> {
        &self.scene
    }

    pub fn model(&self, grain: usize) -> &KernelModel {
        &self.models[grain]
    }

    /// True when every grain has w, z-independent kernels on its range.
    pub fn is_parameter_free(&self) -> bool {
        self.models.iter().all(|m| m.is_parameter_free())
    }

    fn check_param(&self, p: &BallPoint, name: &str) -> Result<()> {
        if p.ambient_dim() != D || !(p.norm() <= 1.0 + 1e-9) {
            return invalid(format!(
                "{name} = {p:?} is not in the closed unit ball of R^{}",
                D - 1
            ));
        }
        Ok(())
    }

    /// D_Φ(ℓ) of the segment's grain.
    pub(crate) fn segment_survival(&self, s: &Segment<D>) -> f64 {
        let m = &self.models[s.grain];
        m.free_path_survival_unchecked(s.len().min(m.xi_max()))
    }

    /// Φ(ℓ, z) of the segment's grain.
    pub(crate) fn segment_exit_survival(&self, s: &Segment<D>, z: &BallPoint) -> f64 {
        let m = &self.models[s.grain];
        m.survival_w_unchecked(s.len().min(m.xi_max()), z.norm())
    }

    fn horizon(xi: f64) -> f64 {
        xi + 1e-12 * (1.0 + xi)
    }

    /// Finds the segment containing ξ, with the product of the factors of
    /// all earlier segments. `exit` selects the Φ(ℓ₁, z) first factor.
    fn locate(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        xi: f64,
        exit: Option<&BallPoint>,
    ) -> Option<Located<D>> {
        let mut prefix = 1.0;
        for (index, s) in self
            .scene
            .itinerary_iter(x, v, Self::horizon(xi))
            .enumerate()
        {
            if xi < s.entry {
                return None;
            }
            if xi < s.exit {
                return Some(Located {
                    index,
                    segment: s,
                    prefix,
                });
            }
            prefix *= match exit {
                Some(z) if index == 0 => self.segment_exit_survival(&s, z),
                _ => self.segment_survival(&s),
            };
        }
        None
    }

    fn starts_inside(&self, x: &Vector<D>, v: &Vector<D>) -> bool {
        self.scene.inside_indicator(x, v)
    }

    /// Ψ(x, v, ξ): free path density for a generic start.
    pub fn psi(&self, x: &Vector<D>, v: &Vector<D>, xi: f64) -> f64 {
        if !(xi >= 0.0) {
            return 0.0;
        }
        match self.locate(x, v, xi, None) {
            Some(l) => {
                let m = &self.models[l.segment.grain];
                l.prefix * m.free_path_unchecked((xi - l.segment.entry).min(m.xi_max()))
            }
            None => 0.0,
        }
    }

    /// Ψ(x, v, ξ, w): joint density of free path and impact parameter.
    pub fn psi_marg_w(&self, x: &Vector<D>, v: &Vector<D>, xi: f64, w: &BallPoint) -> Result<f64> {
        self.check_param(w, "w")?;
        if !(xi >= 0.0) {
            return Ok(0.0);
        }
        Ok(match self.locate(x, v, xi, None) {
            Some(l) => {
                let m = &self.models[l.segment.grain];
                l.prefix * m.survival_w_unchecked((xi - l.segment.entry).min(m.xi_max()), w.norm())
            }
            None => 0.0,
        })
    }

    /// Ψ₀(x, v, ξ, z): free path density after a collision with exit parameter z.
    pub fn psi0_marg(&self, x: &Vector<D>, v: &Vector<D>, xi: f64, z: &BallPoint) -> Result<f64> {
        self.check_param(z, "z")?;
        if !(xi >= 0.0) || !self.starts_inside(x, v) {
            return Ok(0.0);
        }
        Ok(match self.locate(x, v, xi, Some(z)) {
            Some(l) => {
                let m = &self.models[l.segment.grain];
                let eta = (xi - l.segment.entry).min(m.xi_max());
                if l.index == 0 {
                    m.density_w_unchecked(eta, z.norm())
                } else {
                    l.prefix * m.free_path_unchecked(eta)
                }
            }
            None => 0.0,
        })
    }

    /// Ψ₀(x, v, ξ, w, z): the polycrystal transition kernel.
    pub fn psi0_full(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        xi: f64,
        w: &BallPoint,
        z: &BallPoint,
    ) -> Result<f64> {
        self.check_param(w, "w")?;
        self.check_param(z, "z")?;
        if !(xi >= 0.0) || !self.starts_inside(x, v) {
            return Ok(0.0);
        }
        Ok(match self.locate(x, v, xi, Some(z)) {
            Some(l) => {
                let m = &self.models[l.segment.grain];
                let eta = (xi - l.segment.entry).min(m.xi_max());
                if l.index == 0 {
                    m.transition_unchecked(eta, w, z)
                } else {
                    l.prefix * m.survival_w_unchecked(eta, w.norm())
                }
            }
            None => 0.0,
        })
    }

    /// Probability of no collision before ξ in the limit, ∫_ξ^∞ Ψ plus the
    /// escape mass. With `exit = Some(z)` the start is a collision point and
    /// the Ψ₀(·, z) law is used.
    pub fn no_collision_before(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        xi: f64,
        exit: Option<&BallPoint>,
    ) -> f64 {
        if !(xi > 0.0) {
            return 1.0;
        }
        if exit.is_some() && !self.starts_inside(x, v) {
            return 1.0;
        }
        let mut prefix = 1.0;
        for (index, s) in self
            .scene
            .itinerary_iter(x, v, Self::horizon(xi))
            .enumerate()
        {
            if xi <= s.entry {
                break;
            }
            let m = &self.models[s.grain];
            let first = index == 0 && exit.is_some();
            if xi < s.exit {
                let eta = (xi - s.entry).min(m.xi_max());
                let inner = match exit {
                    Some(z) if first => m.survival_w_unchecked(eta, z.norm()),
                    _ => m.free_path_survival_unchecked(eta),
                };
                return prefix * inner;
            }
            prefix *= match exit {
                Some(z) if first => self.segment_exit_survival(&s, z),
                _ => self.segment_survival(&s),
            };
            if prefix < NEGLIGIBLE {
                return 0.0;
            }
        }
        prefix
    }

    /// Escape mass: probability of never colliding (finite scenes), with the
    /// itinerary followed up to `horizon`.
    pub fn escape_mass(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        horizon: f64,
        exit: Option<&BallPoint>,
    ) -> f64 {
        self.no_collision_before(x, v, horizon, exit)
    }

    /// γ = min(σ̄/2, ζ(d)/(2ℓ)), ℓ the largest crystal grain diameter.
    pub fn tail_rate(&self) -> f64 {
        let ell = self
            .scene
            .grains()
            .iter()
            .zip(&self.models)
            .filter(|(_, m)| m.medium == MediumKind::Crystal)
            .map(|(g, _)| g.diameter_bound)
            .fold(0.0, f64::max);
        let s = sigma_bar(D);
        if ell > 0.0 {
            (0.5 * s).min(zeta(D) / (2.0 * ell))
        } else {
            0.5 * s
        }
    }

    /// Envelope constant C = σ̄·e^{ζ(d)/2}. Every last-segment factor is at
    /// most σ̄, and e^{γη} ≤ e^{ζ(d)/2} for η within one grain.
    pub fn tail_constant(&self) -> f64 {
        sigma_bar(D) * (0.5 * zeta(D)).exp()
    }

    /// C·exp(−γ(ξ − gap(x, v, ξ))), dominating every Ψ-family value.
    pub fn psi_tail_bound(&self, x: &Vector<D>, v: &Vector<D>, xi: f64) -> f64 {
        let covered = xi - self.scene.gap(x, v, xi);
        self.tail_constant() * (-self.tail_rate() * covered).exp()
    }

    /// Gap-discounted exponential forms for Poisson scenes:
    /// (Ψ(x,v,ξ), Ψ(x,v,ξ,w), Ψ₀(x,v,ξ,w), Ψ₀(x,v,ξ,w,z)).
    pub fn poisson_psi(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        xi: f64,
    ) -> Result<(f64, f64, f64, f64)> {
        if self.models.iter().any(|m| m.medium != MediumKind::Poisson) {
            return invalid("poisson_psi needs a scene whose grains are all Poisson media");
        }
        if !(xi >= 0.0) {
            return invalid(format!("xi must be >= 0, got {xi}"));
        }
        let s = sigma_bar(D);
        let e = (-s * (xi - self.scene.gap(x, v, xi))).exp();
        let end = if self.scene.inside_indicator(&(x + v * xi), v) {
            1.0
        } else {
            0.0
        };
        let start = if self.scene.inside_indicator(x, v) {
            1.0
        } else {
            0.0
        };
        Ok((s * e * end, e * end, s * e * start * end, e * start * end))
    }

    /// Checks 𝒟Ψ = ∫Ψ₀(·, w)dw by a central difference along (x + εv, ξ − ε),
    /// and the boundary values at ξ = 0.
    pub fn check_transport_identity(
        &self,
        samples: &[(Vector<D>, Vector<D>, f64)],
    ) -> Result<TransportReport> {
        let mut report = TransportReport::default();
        let s_bar = sigma_bar(D);
        let origin = BallPoint::origin(D)?;
        for (x, v, xi) in samples {
            let (x, v, xi) = (*x, *v, *xi);
            let inside = self.scene.inside_indicator(&x, &v);
            let indicator = if inside { 1.0 } else { 0.0 };
            let b0 = (self.psi(&x, &v, 0.0) - s_bar * indicator).abs();
            let b1 = (self.psi_marg_w(&x, &v, 0.0, &origin)? - indicator).abs();
            report.max_boundary_error = report.max_boundary_error.max(b0).max(b1);

            let eps = 1e-6 * (1.0 + xi);
            let guard = 10.0 * eps;
            let segs = self.scene.itinerary(&x, &v, xi + 1.0)?;
            let near_kink = xi <= guard
                || segs
                    .iter()
                    .any(|s| (s.entry - xi).abs() < guard || (s.exit - xi).abs() < guard)
                || segs
                    .first()
                    .is_some_and(|s| (s.entry > 0.0 && s.entry < guard) || s.exit < guard);
            let behind = x - v * eps;
            if near_kink || self.scene.inside_indicator(&behind, &v) != inside {
                report.skipped += 1;
                continue;
            }
            let lhs = (self.psi(&(x + v * eps), &v, xi - eps) - self.psi(&behind, &v, xi + eps))
                / (2.0 * eps);
            let mut failure = None;
            let rhs = integrate_ball(
                D - 1,
                |w| {
                    let w = BallPoint::unchecked(w).expect("ball dimension");
                    match self.psi0_marg(&x, &v, xi, &w) {
                        Ok(val) => val,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                },
                Tolerance {
                    abs: 1e-9,
                    rel: 1e-9,
                    max_intervals: 4000,
                },
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            report.checked += 1;
            report.max_residual = report.max_residual.max((lhs - rhs).abs());
        }
        Ok(report)
    }
}

/// Outcome of [`PolyKernel::check_transport_identity`].
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct TransportReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_residual: f64,
    pub max_boundary_error: f64,
}
