//! Limit laws averaged over directions: free path CDFs, transition cell
//! masses and no-collision fractions, built from the polycrystal kernels.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::ball::BallPoint;
use crate::error::{invalid, Result};
use crate::kernels::{area_below_unchecked, area_integral_fast, KernelModel, MediumKind};
use crate::microsim::DirectionLaw;
use crate::polykernel::PolyKernel;
use crate::quadrature::{integrate, Tolerance};
use crate::scattering::Frame;
use crate::Vector;

const CHUNK: usize = 64;

/// Weighted direction nodes for averaging over λ. Weights sum to one.
#[derive(Debug, Clone)]
pub struct DirectionRule<const D: usize> {
    nodes: Vec<(Vector<D>, f64)>,
}

impl<const D: usize> DirectionRule<D> {
    /// Midpoint rule in angle (d = 2, `resolution` nodes) or a product
    /// midpoint rule in (cos θ, φ) around the cap axis (d = 3,
    /// `resolution × 2·resolution` nodes).
    pub fn new(law: &DirectionLaw<D>, resolution: usize) -> Result<Self> {
        law.validate()?;
        if resolution == 0 {
            return invalid("direction rule needs at least one node");
        }
        let (frame, c) = match law {
            DirectionLaw::Uniform => {
                let mut e = Vector::<D>::zeros();
                e[0] = 1.0;
                (Frame::new(&e), -1.0)
            }
            DirectionLaw::Cap {
                axis,
                cos_half_angle,
            } => (Frame::new(axis), *cos_half_angle),
        };
        let mut nodes = Vec::new();
        match D {
            2 => {
                let h = c.acos();
                let w = 1.0 / resolution as f64;
                for k in 0..resolution {
                    let a = -h + 2.0 * h * (k as f64 + 0.5) * w;
                    let local = Vector::<D>::from_fn(|i, _| if i == 0 { a.cos() } else { a.sin() });
                    nodes.push((unit(frame.from_frame(&local)), w));
                }
            }
            3 => {
                let nphi = 2 * resolution;
                let w = 1.0 / (resolution * nphi) as f64;
                for i in 0..resolution {
                    let u = c + (1.0 - c) * (i as f64 + 0.5) / resolution as f64;
                    let s = (1.0 - u * u).max(0.0).sqrt();
                    for j in 0..nphi {
                        let phi = TAU * (j as f64 + 0.5) / nphi as f64;
                        let local =
                            Vector::<D>::from_fn(|k, _| [u, s * phi.cos(), s * phi.sin()][k]);
                        nodes.push((unit(frame.from_frame(&local)), w));
                    }
                }
            }
            _ => return invalid(format!("direction rules exist for d = 2, 3, got {D}")),
        }
        Ok(DirectionRule { nodes })
    }

    /// A point mass at one direction.
    pub fn single(v: &Vector<D>) -> Result<Self> {
        if !((v.norm() - 1.0).abs() < 1e-9) {
            return invalid("direction must be a unit vector");
        }
        Ok(DirectionRule {
            nodes: vec![(*v, 1.0)],
        })
    }

    pub fn nodes(&self) -> &[(Vector<D>, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ w_k f(v_k), summed in a fixed order whatever the thread count.
    fn average<F>(&self, width: usize, f: F) -> Vec<f64>
    where
        F: Fn(&Vector<D>, f64, &mut [f64]) + Sync,
    {
        let partial: Vec<Vec<f64>> = self
            .nodes
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; width];
                for (v, w) in chunk {
                    f(v, *w, &mut acc);
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; width];
        for p in partial {
            for (o, x) in out.iter_mut().zip(p) {
                *o += x;
            }
        }
        out
    }
}

fn unit<const D: usize>(v: Vector<D>) -> Vector<D> {
    v / v.norm()
}

/// Direction-averaged limit CDF of the free path, tabulated on a uniform
/// grid and interpolated linearly. Escape mass sits at +∞.
#[derive(Debug, Clone)]
pub struct LimitCdf {
    xi: Vec<f64>,
    cdf: Vec<f64>,
}

impl LimitCdf {
    /// F(ξ) = 1 − Σ_k w_k P(no collision before ξ | x, v_k). With `exit`
    /// the start is on a scatterer and the first branch uses Φ(·, z).
    pub fn free_path<const D: usize>(
        kernel: &PolyKernel<D>,
        x: &Vector<D>,
        rule: &DirectionRule<D>,
        exit: Option<&BallPoint>,
        points: usize,
    ) -> Result<Self> {
        Self::build(kernel, std::slice::from_ref(x), rule, exit, points)
    }

    /// The same law with x uniform over `positions` (equal weights).
    pub fn free_path_averaged<const D: usize>(
        kernel: &PolyKernel<D>,
        positions: &[Vector<D>],
        rule: &DirectionRule<D>,
        points: usize,
    ) -> Result<Self> {
        Self::build(kernel, positions, rule, None, points)
    }

    fn build<const D: usize>(
        kernel: &PolyKernel<D>,
        positions: &[Vector<D>],
        rule: &DirectionRule<D>,
        exit: Option<&BallPoint>,
        points: usize,
    ) -> Result<Self> {
        if points < 2 || positions.is_empty() {
            return invalid("limit CDF needs a start position and at least two grid points");
        }
        let end = positions
            .iter()
            .map(|x| grid_end(kernel, x))
            .fold(0.0, f64::max);
        let xi: Vec<f64> = (0..points)
            .map(|i| end * i as f64 / (points - 1) as f64)
            .collect();
        let share = 1.0 / positions.len() as f64;
        let survival = rule.average(points, |v, w, acc| {
            for x in positions {
                survival_profile(kernel, x, v, &xi, exit, w * share, acc);
            }
        });
        let cdf = survival.iter().map(|s| (1.0 - s).clamp(0.0, 1.0)).collect();
        Ok(LimitCdf { xi, cdf })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        if !(xi > 0.0) {
            return 0.0;
        }
        let n = self.xi.len();
        let end = self.xi[n - 1];
        if xi >= end {
            return self.cdf[n - 1];
        }
        let h = end / (n - 1) as f64;
        let i = ((xi / h) as usize).min(n - 2);
        let t = (xi - self.xi[i]) / h;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Collision probability, 1 − escape mass.
    pub fn at_infinity(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    pub fn grid(&self) -> (&[f64], &[f64]) {
        (&self.xi, &self.cdf)
    }
}

/// Beyond this ξ nothing changes: the farthest grain vertex for finite
/// scenes, 40/γ for periodic ones.
fn grid_end<const D: usize>(kernel: &PolyKernel<D>, x: &Vector<D>) -> f64 {
    let scene = kernel.scene();
    if scene.periodic().is_some() {
        return 40.0 / kernel.tail_rate();
    }
    let far = scene
        .grains()
        .iter()
        .flat_map(|g| g.vertices().iter())
        .map(|p| (p - x).norm())
        .fold(0.0, f64::max);
    far * (1.0 + 1e-9) + 1e-9
}

/// Adds w·P(no collision before ξ_i) for every grid value in one walk.
fn survival_profile<const D: usize>(
    kernel: &PolyKernel<D>,
    x: &Vector<D>,
    v: &Vector<D>,
    grid: &[f64],
    exit: Option<&BallPoint>,
    weight: f64,
    acc: &mut [f64],
) {
    let scene = kernel.scene();
    let exit = exit.filter(|_| scene.inside_indicator(x, v));
    let end = grid[grid.len() - 1];
    let mut prefix = 1.0;
    let mut i = 0;
    for (index, s) in scene.itinerary_iter(x, v, end).enumerate() {
        let m = kernel.model(s.grain);
        let first = index == 0 && exit.is_some();
        while i < grid.len() && grid[i] <= s.entry {
            acc[i] += weight * prefix;
            i += 1;
        }
        while i < grid.len() && grid[i] < s.exit {
            let eta = (grid[i] - s.entry).min(m.xi_max());
            let inner = match exit {
                Some(z) if first => m.survival_w_unchecked(eta, z.norm()),
                _ => m.free_path_survival_unchecked(eta),
            };
            acc[i] += weight * prefix * inner;
            i += 1;
        }
        prefix *= match exit {
            Some(z) if first => kernel.segment_exit_survival(&s, z),
            _ => kernel.segment_survival(&s),
        };
        if prefix < 1e-17 || i == grid.len() {
            break;
        }
    }
    for a in &mut acc[i..] {
        *a += weight * prefix;
    }
}

/// Set of impact parameters: an interval of [−1, 1] (d = 2) or an annulus
/// of the unit disk (d = 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImpactRegion {
    Interval { lo: f64, hi: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl ImpactRegion {
    pub fn contains(&self, w: &BallPoint) -> bool {
        match *self {
            ImpactRegion::Interval { lo, hi } => {
                let t = w.as_slice()[0];
                w.ambient_dim() == 2 && t >= lo && t < hi
            }
            ImpactRegion::Annulus { inner, outer } => {
                let n = w.norm();
                w.ambient_dim() == 3 && n >= inner && n < outer
            }
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            ImpactRegion::Interval { lo, hi } => hi - lo,
            ImpactRegion::Annulus { inner, outer } => PI * (outer * outer - inner * inner),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match *self {
            ImpactRegion::Interval { lo, hi } => dim == 2 && -1.0 <= lo && lo < hi && hi <= 1.0,
            ImpactRegion::Annulus { inner, outer } => {
                dim == 3 && 0.0 <= inner && inner < outer && outer <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("impact region {self:?} is not valid in d = {dim}"))
        }
    }

    /// `n` equal-width intervals of [−1, 1], or `n` equal-area annuli.
    pub fn partition(dim: usize, n: usize) -> Result<Vec<ImpactRegion>> {
        if n == 0 {
            return invalid("partition needs at least one region");
        }
        let f = |k: usize| k as f64 / n as f64;
        match dim {
            2 => Ok((0..n)
                .map(|k| ImpactRegion::Interval {
                    lo: 2.0 * f(k) - 1.0,
                    hi: 2.0 * f(k + 1) - 1.0,
                })
                .collect()),
            3 => Ok((0..n)
                .map(|k| ImpactRegion::Annulus {
                    inner: f(k).sqrt(),
                    outer: f(k + 1).sqrt(),
                })
                .collect()),
            _ => invalid(format!("impact regions exist for d = 2, 3, got {dim}")),
        }
    }
}

/// Per-region constants for the closed-form cell integrals.
#[derive(Debug, Clone, Copy)]
struct RegionConst {
    measure: f64,
    // ∫_R G(|w|) dw
    g: f64,
    // ∫_R F(|w − z|/2) dw
    f: f64,
}

fn region_constants(
    dim: usize,
    region: &ImpactRegion,
    z: Option<&BallPoint>,
) -> Result<RegionConst> {
    let measure = region.measure();
    let (g, f) = match (*region, dim) {
        (ImpactRegion::Annulus { inner, outer }, 3) => {
            let tol = Tolerance {
                abs: 1e-11,
                rel: 1e-11,
                max_intervals: 4000,
            };
            let g = TAU * integrate(|rho| rho * area_integral_fast(rho), inner, outer, tol)?.value;
            let f = match z {
                Some(z) => {
                    let (zx, zy) = (z.as_slice()[0], z.as_slice()[1]);
                    let inner_tol = Tolerance { abs: 1e-12, ..tol };
                    let mut err = None;
                    let v = integrate(
                        |phi| {
                            let (s, c) = phi.sin_cos();
                            let r = integrate(
                                |rho| {
                                    let d =
                                        ((rho * c - zx).powi(2) + (rho * s - zy).powi(2)).sqrt();
                                    rho * area_below_unchecked(0.5 * d)
                                },
                                inner,
                                outer,
                                inner_tol,
                            );
                            match r {
                                Ok(i) => i.value,
                                Err(e) => {
                                    err.get_or_insert(e);
                                    0.0
                                }
                            }
                        },
                        0.0,
                        TAU,
                        tol,
                    )?
                    .value;
                    if let Some(e) = err {
                        return Err(e);
                    }
                    v
                }
                None => 0.0,
            };
            (g, f)
        }
        _ => (0.0, 0.0),
    };
    Ok(RegionConst { measure, g, f })
}

/// ∫_{η0}^{η1} ∫_R Φ(η, w) dw dη, or the Φ₀(η, w, z) version when `first`.
fn cell_integral(m: &KernelModel, first: bool, rc: &RegionConst, e0: f64, e1: f64) -> f64 {
    let (e0, e1) = (e0.min(m.xi_max()), e1.min(m.xi_max()));
    if e1 <= e0 {
        return 0.0;
    }
    let zeta = m.zeta;
    match (m.medium, m.dim, first) {
        (MediumKind::Poisson, _, _) => {
            let s = m.sigma_bar;
            rc.measure * ((-s * e0).exp() - (-s * e1).exp()) / s
        }
        (MediumKind::Crystal, 2, true) => 6.0 / (PI * PI) * rc.measure * (e1 - e0),
        (MediumKind::Crystal, 2, false) => {
            let p = |e: f64| e - 6.0 / (PI * PI) * e * e;
            rc.measure * (p(e1) - p(e0))
        }
        (MediumKind::Crystal, _, true) => {
            (rc.measure * (e1 - e0) - 3.0 / (PI * PI) * rc.f * (e1 * e1 - e0 * e0)) / zeta
        }
        (MediumKind::Crystal, _, false) => {
            let p = |e: f64| {
                rc.measure * (e - PI / (2.0 * zeta) * e * e)
                    + 2.0 / (PI * PI * zeta) * rc.g * e * e * e
            };
            p(e1) - p(e0)
        }
    }
}

/// Limit probabilities of the cells {τ₁ ∈ [a_i, a_{i+1}), w ∈ R_j}, row-major
/// in (i, j). The complement (later collisions, other w, escape) has mass
/// 1 − Σ. With `exit` the start is on a scatterer with exit parameter z.
pub fn cell_masses<const D: usize>(
    kernel: &PolyKernel<D>,
    x: &Vector<D>,
    rule: &DirectionRule<D>,
    exit: Option<&BallPoint>,
    xi_edges: &[f64],
    regions: &[ImpactRegion],
) -> Result<Vec<f64>> {
    if xi_edges.len() < 2 || xi_edges.windows(2).any(|w| !(w[0] < w[1])) || !(xi_edges[0] >= 0.0) {
        return invalid("xi edges must be at least two increasing non-negative values");
    }
    for r in regions {
        r.validate(D)?;
    }
    let consts = regions
        .iter()
        .map(|r| region_constants(D, r, exit))
        .collect::<Result<Vec<_>>>()?;
    let nx = xi_edges.len() - 1;
    let nr = regions.len();
    let end = xi_edges[nx];
    let scene = kernel.scene();
    Ok(rule.average(nx * nr, |v, weight, acc| {
        let exit = exit.filter(|_| scene.inside_indicator(x, v));
        let mut prefix = 1.0;
        for (index, s) in scene.itinerary_iter(x, v, end).enumerate() {
            let m = kernel.model(s.grain);
            let first = index == 0 && exit.is_some();
            for i in 0..nx {
                let a = xi_edges[i].max(s.entry);
                let b = xi_edges[i + 1].min(s.exit);
                if b <= a {
                    continue;
                }
                for (j, rc) in consts.iter().enumerate() {
                    acc[i * nr + j] +=
                        weight * prefix * cell_integral(m, first, rc, a - s.entry, b - s.entry);
                }
            }
            prefix *= match exit {
                Some(z) if first => kernel.segment_exit_survival(&s, z),
                _ => kernel.segment_survival(&s),
            };
            if prefix < 1e-17 {
                break;
            }
        }
    }))
}

/// Midpoint nodes of the box [lo, hi] with `per_axis` nodes per coordinate.
pub fn box_nodes<const D: usize>(
    lo: &Vector<D>,
    hi: &Vector<D>,
    per_axis: usize,
) -> Vec<Vector<D>> {
    let total = per_axis.pow(D as u32);
    (0..total)
        .map(|mut k| {
            Vector::<D>::from_fn(|i, _| {
                let c = k % per_axis;
                k /= per_axis;
                lo[i] + (hi[i] - lo[i]) * (c as f64 + 0.5) / per_axis as f64
            })
        })
        .collect()
}

/// ∫∫ f₀ · P(no collision in [0, t]) for f₀ uniform on the box [lo, hi]
/// times λ, by a midpoint rule with `per_axis` nodes per coordinate.
pub fn no_collision_fraction<const D: usize>(
    kernel: &PolyKernel<D>,
    lo: &Vector<D>,
    hi: &Vector<D>,
    rule: &DirectionRule<D>,
    per_axis: usize,
    t: f64,
) -> Result<f64> {
    if per_axis == 0 || (0..D).any(|i| !(lo[i] < hi[i])) {
        return invalid(
            "no_collision_fraction needs a non-empty box and at least one node per axis",
        );
    }
    let points = box_nodes(lo, hi, per_axis);
    let sums: Vec<f64> = points
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = 0.0;
            for x in chunk {
                for (v, w) in rule.nodes() {
                    s += w * kernel.no_collision_before(x, v, t, None);
                }
            }
            s
        })
        .collect();
    Ok(sums.iter().sum::<f64>() / points.len() as f64)
}
