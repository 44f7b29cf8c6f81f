//! Exact Lorentz gas dynamics against radius-r scatterers.
//!
//! Crystal grain i carries the centres anchor + ε(Z^d + ω_i)M_i that lie in
//! the open grain, or a per-sample random translate of them; Poisson grains
//! carry one seeded realization of a Poisson process of intensity ε^{-d}.
//! Periodic scenes repeat the whole microscopic configuration with the box.

use std::ops::Range;

use crate::ball::BallPoint;
use crate::error::{invalid, Error, Result};
use crate::geometry::{neighbor_cells, ConvexGrain, Medium, Scene};
use crate::lattice::ScaledGrainLattice;
use crate::rng::{substream, uniform_box, uniform_sphere, StreamRng};
use crate::scattering::{reflect_unchecked, Frame};
use crate::Vector;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

/// Stream index reserved for the Poisson realizations of a run.
const POISSON_STREAM: u64 = 1 << 62;
/// Stream index reserved for the per-run random q.
const OFFSET_STREAM: u64 = (1 << 62) + (1 << 40);

/// Initial offset function β(v).
#[derive(Debug, Clone, PartialEq)]
pub enum Beta {
    /// β = 0.
    Zero,
    /// β(v) = lift of s to the v-hemisphere of the unit sphere, in the frame
    /// of v. The ray β + R₊v then stays outside the open unit ball.
    Exit(BallPoint),
}

impl Beta {
    /// β(v) = v, the front pole.
    pub fn forward(dim: usize) -> Result<Beta> {
        Ok(Beta::Exit(BallPoint::origin(dim)?))
    }

    pub fn offset<const D: usize>(&self, v: &Vector<D>) -> Vector<D> {
        match self {
            Beta::Zero => Vector::<D>::zeros(),
            Beta::Exit(s) => Frame::new(v).lift(s, 1.0),
        }
    }

    /// (β(v)K(v))_⊥, the exit parameter of an on-scatterer start.
    pub fn exit_param(&self) -> Option<&BallPoint> {
        match self {
            Beta::Zero => None,
            Beta::Exit(s) => Some(s),
        }
    }
}

/// Microscopic run parameters.
#[derive(Debug, Clone)]
pub struct MicroConfig<const D: usize> {
    pub r: f64,
    pub beta: Beta,
    /// Start offset q; `None` draws one uniformly from [0, 1)^d per run.
    pub q: Option<Vector<D>>,
    pub seed: u64,
    /// Search cutoff; `None` means ten times the scene extent.
    pub cutoff: Option<f64>,
    pub max_events: usize,
    /// Crystal grains whose offset ω is redrawn uniformly from [0, 1)^d for
    /// every sample (no anchor shift). Indexed by grain; missing means fixed.
    pub random_offsets: Vec<bool>,
}

impl<const D: usize> MicroConfig<D> {
    pub fn new(r: f64, seed: u64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return invalid(format!("scatterer radius must be in (0, 1), got {r}"));
        }
        Ok(MicroConfig {
            r,
            beta: Beta::Zero,
            q: None,
            seed,
            cutoff: None,
            max_events: 10_000_000,
            random_offsets: Vec::new(),
        })
    }

    /// ε = r^{(d−1)/d}.
    pub fn epsilon(&self) -> f64 {
        self.r.powf((D as f64 - 1.0) / D as f64)
    }

    /// The fixed q, or the per-run random one.
    pub fn offset_q(&self) -> Vector<D> {
        match self.q {
            Some(q) => q,
            None => {
                let mut rng = substream(self.seed, OFFSET_STREAM);
                uniform_box(&mut rng, &Vector::<D>::zeros(), &Vector::<D>::repeat(1.0))
            }
        }
    }
}

/// One specular collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent<const D: usize> {
    /// Flight time since the previous event (or the start).
    pub tau: f64,
    pub center: Vector<D>,
    /// Unit normal at the impact, x₁ = r·w₁ + y.
    pub w1: Vector<D>,
    pub point: Vector<D>,
    pub grain: usize,
    pub v_in: Vector<D>,
    pub v_out: Vector<D>,
}

/// Direction law λ on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionLaw<const D: usize> {
    Uniform,
    /// Uniform on the cap {v : v·axis ≥ cos_half_angle}.
    Cap {
        axis: Vector<D>,
        cos_half_angle: f64,
    },
}

impl<const D: usize> DirectionLaw<D> {
    pub fn validate(&self) -> Result<()> {
        match self {
            DirectionLaw::Uniform => Ok(()),
            DirectionLaw::Cap {
                axis,
                cos_half_angle,
            } => {
                if (axis.norm() - 1.0).abs() > 1e-9
                    || !(*cos_half_angle > -1.0 && *cos_half_angle < 1.0)
                {
                    return invalid(
                        "direction cap needs a unit axis and cos(half angle) in (-1, 1)",
                    );
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector<D> {
        match self {
            DirectionLaw::Uniform => uniform_sphere(rng),
            DirectionLaw::Cap {
                axis,
                cos_half_angle,
            } => {
                let frame = Frame::new(axis);
                let local = if D == 2 {
                    let h = cos_half_angle.acos();
                    let a = rng.random_range(-h..h);
                    Vector::<D>::from_fn(|i, _| if i == 0 { a.cos() } else { a.sin() })
                } else {
                    let u = rng.random_range(*cos_half_angle..1.0);
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    let s = (1.0 - u * u).max(0.0).sqrt();
                    Vector::<D>::from_fn(|i, _| [u, s * phi.cos(), s * phi.sin()][i])
                };
                let v = frame.from_frame(&local);
                v / v.norm()
            }
        }
    }
}

/// Poisson points of one grain in a uniform cell grid.
#[derive(Debug, Clone)]
struct PointGrid<const D: usize> {
    lo: Vector<D>,
    h: f64,
    n: [usize; D],
    start: Vec<u32>,
    items: Vec<u32>,
    points: Vec<Vector<D>>,
}

impl<const D: usize> PointGrid<D> {
    /// Each point is registered in every cell its r-ball meets, so walking
    /// the cells crossed by a line finds every ball the line hits.
    fn new(points: Vec<Vector<D>>, lo: Vector<D>, hi: Vector<D>, h: f64, r: f64) -> Self {
        let n: [usize; D] = std::array::from_fn(|i| (((hi[i] - lo[i]) / h).ceil() as usize).max(1));
        let total: usize = n.iter().product();
        let index = |c: &[usize; D]| {
            c.iter()
                .zip(&n)
                .rev()
                .fold(0, |acc, (ci, ni)| acc * ni + ci)
        };
        let cell_range = |p: &Vector<D>| -> ([usize; D], [usize; D]) {
            let a = std::array::from_fn(|i| {
                (((p[i] - r - lo[i]) / h).floor().max(0.0) as usize).min(n[i] - 1)
            });
            let b = std::array::from_fn(|i| {
                (((p[i] + r - lo[i]) / h).floor().max(0.0) as usize).min(n[i] - 1)
            });
            (a, b)
        };
        let mut pairs: Vec<(usize, u32)> = Vec::with_capacity(points.len());
        for (k, p) in points.iter().enumerate() {
            let (a, b) = cell_range(p);
            let mut c = a;
            'cells: loop {
                pairs.push((index(&c), k as u32));
                for i in 0..D {
                    if c[i] < b[i] {
                        c[i] += 1;
                        continue 'cells;
                    }
                    c[i] = a[i];
                }
                break;
            }
        }
        pairs.sort_unstable();
        let mut start = vec![0u32; total + 1];
        for (cell, _) in &pairs {
            start[cell + 1] += 1;
        }
        for i in 0..total {
            start[i + 1] += start[i];
        }
        let items = pairs.into_iter().map(|(_, k)| k).collect();
        PointGrid {
            lo,
            h,
            n,
            start,
            items,
            points,
        }
    }

    fn cell_items(&self, c: &[i64; D]) -> &[u32] {
        let idx = c
            .iter()
            .zip(&self.n)
            .rev()
            .fold(0usize, |acc, (ci, ni)| acc * ni + *ci as usize);
        &self.items[self.start[idx] as usize..self.start[idx + 1] as usize]
    }

    /// Calls `f` for every point whose r-ball may meet x + [t0, t1]v.
    fn visit_line(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        t0: f64,
        t1: f64,
        mut f: impl FnMut(&Vector<D>),
    ) {
        // clip to the grid box
        let (mut ta, mut tb) = (t0, t1);
        for i in 0..D {
            let (a, b) = (self.lo[i], self.lo[i] + self.n[i] as f64 * self.h);
            if v[i].abs() < 1e-300 {
                if x[i] < a || x[i] > b {
                    return;
                }
                continue;
            }
            let (p, q) = ((a - x[i]) / v[i], (b - x[i]) / v[i]);
            ta = ta.max(p.min(q));
            tb = tb.min(p.max(q));
        }
        if ta > tb {
            return;
        }
        let p = x + v * ta;
        let mut cell: [i64; D] = std::array::from_fn(|i| {
            (((p[i] - self.lo[i]) / self.h).floor() as i64).clamp(0, self.n[i] as i64 - 1)
        });
        let mut t_next = [f64::INFINITY; D];
        let mut t_delta = [f64::INFINITY; D];
        let mut step = [0i64; D];
        for i in 0..D {
            if v[i] > 0.0 {
                step[i] = 1;
                t_delta[i] = self.h / v[i];
                t_next[i] = (self.lo[i] + (cell[i] + 1) as f64 * self.h - x[i]) / v[i];
            } else if v[i] < 0.0 {
                step[i] = -1;
                t_delta[i] = -self.h / v[i];
                t_next[i] = (self.lo[i] + cell[i] as f64 * self.h - x[i]) / v[i];
            }
        }
        loop {
            for &k in self.cell_items(&cell) {
                f(&self.points[k as usize]);
            }
            let axis = (0..D)
                .min_by(|&a, &b| t_next[a].total_cmp(&t_next[b]))
                .expect("D >= 1");
            if t_next[axis] > tb {
                return;
            }
            cell[axis] += step[axis];
            if cell[axis] < 0 || cell[axis] >= self.n[axis] as i64 {
                return;
            }
            t_next[axis] += t_delta[axis];
        }
    }
}

#[derive(Debug, Clone)]
enum Scatterers<const D: usize> {
    Crystal(ScaledGrainLattice<D>),
    Poisson(PointGrid<D>),
}

/// A scene populated with scatterers of radius r.
#[derive(Debug, Clone)]
pub struct MicroScene<const D: usize> {
    scene: Scene<D>,
    inflated: Vec<ConvexGrain<D>>,
    scatterers: Vec<Scatterers<D>>,
    r: f64,
    epsilon: f64,
    cutoff: f64,
    max_events: usize,
    randomized: Vec<bool>,
}

/// Stable first root of |x + tv − y|² = r² for t ≥ 0.
#[inline]
fn sphere_hit<const D: usize>(x: &Vector<D>, v: &Vector<D>, y: &Vector<D>, r: f64) -> Option<f64> {
    let d = x - y;
    let b = d.dot(v);
    if b >= 0.0 {
        return None;
    }
    let c = d.norm_squared() - r * r;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    Some(c / (-b + disc.sqrt()))
}

impl<const D: usize> MicroScene<D> {
    /// Populates the grains. Crystal centres are anchored at `anchor`.
    pub fn new(scene: &Scene<D>, cfg: &MicroConfig<D>, anchor: &Vector<D>) -> Result<Self> {
        let r = cfg.r;
        let epsilon = cfg.epsilon();
        if !(r > 0.0) {
            return invalid(format!("scatterer radius must be positive, got {r}"));
        }
        let intensity = epsilon.powi(-(D as i32));
        let mut scatterers = Vec::with_capacity(scene.grains().len());
        let mut randomized = vec![false; scene.grains().len()];
        for (i, (g, m)) in scene.grains().iter().zip(scene.media()).enumerate() {
            let random = cfg.random_offsets.get(i).copied().unwrap_or(false);
            scatterers.push(match m {
                Medium::Crystal(lat) if random => {
                    randomized[i] = true;
                    Scatterers::Crystal(ScaledGrainLattice::new(
                        lat.with_omega(Vector::<D>::zeros()),
                        epsilon,
                        Vector::<D>::zeros(),
                    )?)
                }
                Medium::Crystal(lat) => {
                    Scatterers::Crystal(ScaledGrainLattice::new(lat.clone(), epsilon, *anchor)?)
                }
                Medium::Poisson if random => {
                    return invalid(format!("grain {i}: random offsets apply to crystals only"))
                }
                Medium::Poisson => {
                    let (lo, hi) = g.bounding_box();
                    let volume: f64 = (hi - lo).iter().product();
                    let mut rng = substream(cfg.seed, POISSON_STREAM + i as u64);
                    let mean = intensity * volume;
                    if mean > 5e8 {
                        return invalid(format!(
                            "Poisson grain {i} would need about {mean:.3e} scatterers"
                        ));
                    }
                    let count = Poisson::new(mean)
                        .map_err(|e| Error::InvalidInput(e.to_string()))?
                        .sample(&mut rng) as usize;
                    let points: Vec<Vector<D>> = (0..count)
                        .map(|_| uniform_box(&mut rng, &lo, &hi))
                        .filter(|p| g.contains(p))
                        .collect();
                    Scatterers::Poisson(PointGrid::new(points, lo, hi, epsilon, r))
                }
            });
        }
        let cutoff = cfg.cutoff.unwrap_or(10.0 * scene.extent());
        if !(cutoff > 0.0) {
            return invalid(format!("search cutoff must be positive, got {cutoff}"));
        }
        Ok(MicroScene {
            scene: scene.clone(),
            inflated: scene.grains().iter().map(|g| g.inflated(r)).collect(),
            scatterers,
            r,
            epsilon,
            cutoff,
            max_events: cfg.max_events,
            randomized,
        })
    }

    pub fn scene(&self) -> &Scene<D> {
        &self.scene
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Number of Poisson scatterers per grain (zero for crystals).
    pub fn poisson_counts(&self) -> Vec<usize> {
        self.scatterers
            .iter()
            .map(|s| match s {
                Scatterers::Poisson(p) => p.points.len(),
                Scatterers::Crystal(_) => 0,
            })
            .collect()
    }

    /// q with x + εq a scatterer centre of crystal grain `grain`: q = ω M.
    pub fn on_scatterer_offset(&self, grain: usize) -> Result<Vector<D>> {
        match self.scene.media().get(grain) {
            Some(Medium::Crystal(lat)) => Ok(lat.matrix().transpose() * lat.omega()),
            Some(Medium::Poisson) => invalid(format!(
                "grain {grain} is a Poisson medium; on-scatterer starts need a crystal"
            )),
            None => invalid(format!("no grain {grain}")),
        }
    }

    /// Scans candidates of one grain copy with ray parameter in [t0, t1].
    #[allow(clippy::too_many_arguments)]
    fn scan(
        &self,
        grain: usize,
        xs: &Vector<D>,
        v: &Vector<D>,
        t0: f64,
        t1: f64,
        best: &mut Option<(f64, Vector<D>, usize)>,
        shift: &Vector<D>,
        lattice_shifts: &[Vector<D>],
    ) {
        let r = self.r;
        let g = &self.scene.grains()[grain];
        let mut consider = |y: &Vector<D>| {
            if !g.contains(y) {
                return;
            }
            if let Some(t) = sphere_hit(xs, v, y, r) {
                if best.is_none_or(|(b, _, _)| t < b) {
                    *best = Some((t, y + shift, grain));
                }
            }
        };
        match &self.scatterers[grain] {
            Scatterers::Crystal(lat) => match lattice_shifts.get(grain) {
                Some(s) => lat.visit_tube(&(xs - s), v, t0.max(0.0), t1, r, |y| consider(&(y + s))),
                None => lat.visit_tube(xs, v, t0.max(0.0), t1, r, |y| consider(&y)),
            },
            Scatterers::Poisson(grid) => {
                grid.visit_line(xs, v, (t0 - r).max(0.0), t1 + r, |y| consider(y))
            }
        }
    }

    /// Earliest hit with time below `limit`, as (τ, centre, grain).
    fn first_hit(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        limit: f64,
        lattice_shifts: &[Vector<D>],
    ) -> Option<(f64, Vector<D>, usize)> {
        let r = self.r;
        let mut best: Option<(f64, Vector<D>, usize)> = None;
        let bound = |best: &Option<(f64, Vector<D>, usize)>| best.map_or(limit, |b| b.0.min(limit));
        match self.scene.periodic() {
            None => {
                let mut chords: Vec<(f64, f64, usize)> = self
                    .inflated
                    .iter()
                    .enumerate()
                    .filter_map(|(i, g)| g.intersect_ray(x, v).map(|(a, b)| (a, b, i)))
                    .filter(|c| c.0 < limit + r)
                    .collect();
                chords.sort_by(|a, b| a.0.total_cmp(&b.0));
                let zero = Vector::<D>::zeros();
                for (a, b, i) in chords {
                    let stop = bound(&best);
                    if a - r >= stop {
                        break;
                    }
                    self.scan(
                        i,
                        x,
                        v,
                        a,
                        b.min(stop + r),
                        &mut best,
                        &zero,
                        lattice_shifts,
                    );
                }
            }
            Some(pb) => {
                let l = pb.size();
                let mut cell = pb.cell(x);
                let mut t_next = [f64::INFINITY; D];
                let mut t_delta = [f64::INFINITY; D];
                let mut step = [0i64; D];
                for i in 0..D {
                    if v[i] > 0.0 {
                        step[i] = 1;
                        t_delta[i] = l[i] / v[i];
                        t_next[i] = (pb.lo[i] + (cell[i] + 1) as f64 * l[i] - x[i]) / v[i];
                    } else if v[i] < 0.0 {
                        step[i] = -1;
                        t_delta[i] = -l[i] / v[i];
                        t_next[i] = (pb.lo[i] + cell[i] as f64 * l[i] - x[i]) / v[i];
                    }
                }
                let mut t_cell = 0.0;
                while t_cell < bound(&best) + r {
                    let axis = (0..D)
                        .min_by(|&a, &b| t_next[a].total_cmp(&t_next[b]))
                        .expect("D >= 1");
                    let t_end = t_next[axis];
                    // inflated grains of neighbouring copies reach into this cell
                    for offset in neighbor_cells::<D>() {
                        let copy: [i64; D] = std::array::from_fn(|i| cell[i] + offset[i]);
                        let shift = pb.cell_shift(&copy);
                        let xs = x - shift;
                        for (i, g) in self.inflated.iter().enumerate() {
                            if let Some((a, b)) = g.intersect_ray(&xs, v) {
                                let (a, b) = (a.max(t_cell - r), b.min(t_end + r));
                                if a < b {
                                    self.scan(i, &xs, v, a, b, &mut best, &shift, lattice_shifts);
                                }
                            }
                        }
                    }
                    if best.is_some_and(|b| b.0 <= t_end - r) || !t_end.is_finite() {
                        break;
                    }
                    t_cell = t_end;
                    cell[axis] += step[axis];
                    t_next[axis] += t_delta[axis];
                }
            }
        }
        best.filter(|b| b.0 < limit)
    }

    fn event(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        hit: (f64, Vector<D>, usize),
    ) -> CollisionEvent<D> {
        let (tau, center, grain) = hit;
        let point = x + v * tau;
        let w = point - center;
        let w1 = w / w.norm();
        CollisionEvent {
            tau,
            center,
            w1,
            point: center + w1 * self.r,
            grain,
            v_in: *v,
            v_out: reflect_unchecked(v, &w1),
        }
    }

    /// First collision from x in direction v, or `None` if no scatterer is
    /// hit within the cutoff. The start must be outside all open balls.
    pub fn first_collision(&self, x: &Vector<D>, v: &Vector<D>) -> Option<CollisionEvent<D>> {
        self.first_hit(x, v, self.cutoff, &[])
            .map(|h| self.event(x, v, h))
    }

    /// As [`first_collision`](Self::first_collision), with crystal grain i
    /// translated by `lattice_shifts[i]` (an empty slice means no shifts).
    pub fn first_collision_shifted(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        lattice_shifts: &[Vector<D>],
    ) -> Option<CollisionEvent<D>> {
        self.first_hit(x, v, self.cutoff, lattice_shifts)
            .map(|h| self.event(x, v, h))
    }

    /// Some grain has per-sample random offsets.
    pub fn has_random_offsets(&self) -> bool {
        self.randomized.iter().any(|b| *b)
    }

    /// Fresh lattice translations εωM for the randomized grains (zero for
    /// the others), or an empty vector if there are none.
    pub fn draw_lattice_shifts<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vector<D>> {
        if !self.has_random_offsets() {
            return Vec::new();
        }
        let unit = Vector::<D>::repeat(1.0);
        self.scatterers
            .iter()
            .zip(&self.randomized)
            .map(|(s, random)| match s {
                Scatterers::Crystal(lat) if *random => {
                    let w = uniform_box(rng, &Vector::<D>::zeros(), &unit);
                    lat.lattice().matrix().transpose() * w * self.epsilon
                }
                _ => Vector::<D>::zeros(),
            })
            .collect()
    }

    /// Collisions in [0, t_max] of the trajectory from (x0, v0).
    pub fn trajectory(
        &self,
        x0: &Vector<D>,
        v0: &Vector<D>,
        t_max: f64,
    ) -> Result<Vec<CollisionEvent<D>>> {
        if !(t_max > 0.0) {
            return invalid(format!("t_max must be positive, got {t_max}"));
        }
        let mut events = Vec::new();
        let (mut x, mut v) = (*x0, *v0);
        let mut elapsed = 0.0;
        while let Some(h) = self.first_hit(&x, &v, t_max - elapsed, &[]) {
            if events.len() >= self.max_events {
                return Err(Error::Runaway(events.len()));
            }
            let e = self.event(&x, &v, h);
            elapsed += e.tau;
            x = e.point;
            v = e.v_out;
            events.push(e);
        }
        Ok(events)
    }

    /// τ₁ and (−w₁K(v))_⊥ for directions drawn from `law`, started at
    /// x + εq + rβ(v). Sample i uses RNG stream i of `seed`; grains with
    /// random offsets are redrawn per sample.
    pub fn sample_free_paths(
        &self,
        x: &Vector<D>,
        q: &Vector<D>,
        beta: &Beta,
        law: &DirectionLaw<D>,
        ids: Range<usize>,
        seed: u64,
    ) -> Result<Vec<FreePathSample<D>>> {
        law.validate()?;
        if let Beta::Exit(s) = beta {
            if s.ambient_dim() != D || s.norm() > 1.0 + 1e-12 {
                return invalid("beta exit parameter must lie in the unit ball of R^{d-1}");
            }
        }
        let base = x + q * self.epsilon;
        Ok(self.sample_free_paths_with(ids, seed, |rng| {
            let v = law.sample(rng);
            (base + beta.offset(&v) * self.r, v)
        }))
    }

    /// τ₁ and (−w₁K(v))_⊥ for starts (x, v) produced by `draw` from RNG
    /// stream i of `seed`, for each sample id i.
    pub fn sample_free_paths_with<F>(
        &self,
        ids: Range<usize>,
        seed: u64,
        draw: F,
    ) -> Vec<FreePathSample<D>>
    where
        F: Fn(&mut StreamRng) -> (Vector<D>, Vector<D>) + Sync,
    {
        ids.into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, i as u64);
                let (start, v) = draw(&mut rng);
                let shifts = self.draw_lattice_shifts(&mut rng);
                match self.first_collision_shifted(&start, &v, &shifts) {
                    Some(e) => FreePathSample {
                        id: i,
                        v,
                        tau: e.tau,
                        grain: Some(e.grain),
                        impact: Some(Frame::new(&v).perp(&-e.w1)),
                    },
                    None => FreePathSample {
                        id: i,
                        v,
                        tau: f64::INFINITY,
                        grain: None,
                        impact: None,
                    },
                }
            })
            .collect()
    }
}

/// Outcome of one free-path sample; escapes have τ = ∞.
#[derive(Debug, Clone, PartialEq)]
pub struct FreePathSample<const D: usize> {
    pub id: usize,
    pub v: Vector<D>,
    pub tau: f64,
    pub grain: Option<usize>,
    pub impact: Option<BallPoint>,
}

impl<const D: usize> FreePathSample<D> {
    pub fn escaped(&self) -> bool {
        self.grain.is_none()
    }
}
