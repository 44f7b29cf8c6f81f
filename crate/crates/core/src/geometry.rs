//! Convex grains, scenes, itineraries and the gap function.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::explicit_range;
use crate::lattice::AffineLattice;
use crate::Vector;

/// Relative tolerance for entry/exit comparisons.
pub const REL_TOL: f64 = 1e-12;

/// An open convex polytope {x : n_k·x < c_k for all k}.
#[derive(Debug, Clone)]
pub struct ConvexGrain<const D: usize> {
    pub id: usize,
    normals: Vec<Vector<D>>,
    offsets: Vec<f64>,
    vertices: Vec<Vector<D>>,
    /// Largest distance between two points of the closure.
    pub diameter_bound: f64,
}

fn solve<const D: usize>(rows: &[Vector<D>], rhs: &[f64]) -> Option<Vector<D>> {
    let a = DMatrix::from_fn(D, D, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let lu = a.lu();
    if lu.determinant().abs() < 1e-12 {
        return None;
    }
    lu.solve(&b).map(|x| Vector::<D>::from_fn(|i, _| x[i]))
}

/// Unit vector orthogonal to D - 1 linearly independent rows, or `None`
/// when the rows are dependent.
fn null_direction<const D: usize>(rows: &[Vector<D>]) -> Option<Vector<D>> {
    let mut basis: Vec<Vector<D>> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut q = *r;
        for b in &basis {
            q -= b * b.dot(&q);
        }
        if !(q.norm() > 1e-10 * r.norm()) {
            return None;
        }
        basis.push(q.normalize());
    }
    let mut best = Vector::<D>::zeros();
    for i in 0..D {
        let mut e = Vector::<D>::zeros();
        e[i] = 1.0;
        for b in &basis {
            e -= b * b[i];
        }
        if e.norm() > best.norm() {
            best = e;
        }
    }
    (best.norm() > 1e-8).then(|| best.normalize())
}

impl<const D: usize> ConvexGrain<D> {
    /// Builds a grain from halfspaces (n, c) meaning n·x < c. Normals need
    /// not be unit length.
    pub fn from_halfspaces(id: usize, halfspaces: &[(Vector<D>, f64)]) -> Result<Self> {
        let mut normals = Vec::with_capacity(halfspaces.len());
        let mut offsets = Vec::with_capacity(halfspaces.len());
        for (n, c) in halfspaces {
            let len = n.norm();
            if !(len > 0.0) || !c.is_finite() {
                return Err(Error::Geometry(format!(
                    "grain {id}: degenerate halfspace ({n:?}, {c})"
                )));
            }
            normals.push(n / len);
            offsets.push(c / len);
        }
        if normals.len() < D + 1 {
            return Err(Error::Geometry(format!(
                "grain {id}: at least {} halfspaces are needed",
                D + 1
            )));
        }
        let rank = DMatrix::from_fn(normals.len(), D, |i, j| normals[i][j]).rank(1e-10);
        if rank < D {
            return Err(Error::Geometry(format!(
                "grain {id} is unbounded (normals span rank {rank})"
            )));
        }
        // an extreme ray of the recession cone would lie on D - 1 planes
        for subset in (0..normals.len()).combinations(D - 1) {
            let rows: Vec<Vector<D>> = subset.iter().map(|&k| normals[k]).collect();
            if let Some(u) = null_direction(&rows) {
                for dir in [u, -u] {
                    if normals.iter().all(|n| n.dot(&dir) <= 1e-12) {
                        return Err(Error::Geometry(format!(
                            "grain {id} is unbounded along {dir:?}"
                        )));
                    }
                }
            }
        }
        let vertices = enumerate_vertices(&normals, &offsets);
        if vertices.is_empty() {
            return Err(Error::Geometry(format!("grain {id} is empty")));
        }
        let centroid =
            vertices.iter().fold(Vector::<D>::zeros(), |a, p| a + p) / vertices.len() as f64;
        let mut diameter: f64 = 0.0;
        for (a, b) in vertices.iter().tuple_combinations() {
            diameter = diameter.max((a - b).norm());
        }
        let slack = 1e-9 * (1.0 + diameter);
        if normals
            .iter()
            .zip(&offsets)
            .any(|(n, c)| n.dot(&centroid) >= c - slack)
        {
            return Err(Error::Geometry(format!("grain {id} has empty interior")));
        }
        Ok(ConvexGrain {
            id,
            normals,
            offsets,
            vertices,
            diameter_bound: diameter * (1.0 + 1e-12),
        })
    }

    /// Convex hull of `points` in H-representation.
    pub fn from_vertices(id: usize, points: &[Vector<D>]) -> Result<Self> {
        if points.len() < D + 1 {
            return Err(Error::Geometry(format!(
                "grain {id}: at least {} vertices are needed",
                D + 1
            )));
        }
        let scale = points.iter().map(|p| p.norm()).fold(1.0, f64::max);
        let mut planes: Vec<(Vector<D>, f64)> = Vec::new();
        for subset in (0..points.len()).combinations(D) {
            let base = points[subset[0]];
            let diffs: Vec<Vector<D>> = subset[1..].iter().map(|&k| points[k] - base).collect();
            let Some(n) = null_direction(&diffs) else {
                continue;
            };
            let c = n.dot(&base);
            let side: Vec<f64> = points.iter().map(|p| n.dot(p) - c).collect();
            let tol = 1e-10 * scale;
            let (n, c) = if side.iter().all(|s| *s <= tol) {
                (n, c)
            } else if side.iter().all(|s| *s >= -tol) {
                (-n, -c)
            } else {
                continue;
            };
            if !planes
                .iter()
                .any(|(m, e)| (m - n).norm() < 1e-9 && (e - c).abs() < 1e-9 * scale)
            {
                planes.push((n, c));
            }
        }
        Self::from_halfspaces(id, &planes)
    }

    /// The axis-aligned box (lo, hi).
    pub fn cuboid(id: usize, lo: &Vector<D>, hi: &Vector<D>) -> Result<Self> {
        let mut hs = Vec::with_capacity(2 * D);
        for i in 0..D {
            let mut e = Vector::<D>::zeros();
            e[i] = 1.0;
            hs.push((e, hi[i]));
            hs.push((-e, -lo[i]));
        }
        Self::from_halfspaces(id, &hs)
    }

    pub fn halfspaces(&self) -> impl Iterator<Item = (&Vector<D>, f64)> + '_ {
        self.normals.iter().zip(self.offsets.iter().copied())
    }

    pub fn vertices(&self) -> &[Vector<D>] {
        &self.vertices
    }

    /// Strict interior membership.
    pub fn contains(&self, p: &Vector<D>) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(n, c)| n.dot(p) < *c)
    }

    /// Grain with every face pushed out by `r` (a superset of the r-neighbourhood).
    pub fn inflated(&self, r: f64) -> ConvexGrain<D> {
        let offsets: Vec<f64> = self.offsets.iter().map(|c| c + r).collect();
        let vertices = enumerate_vertices(&self.normals, &offsets);
        let mut diameter: f64 = 0.0;
        for (a, b) in vertices.iter().tuple_combinations() {
            diameter = diameter.max((a - b).norm());
        }
        ConvexGrain {
            id: self.id,
            normals: self.normals.clone(),
            offsets,
            vertices,
            diameter_bound: diameter,
        }
    }

    pub fn translated(&self, shift: &Vector<D>) -> ConvexGrain<D> {
        ConvexGrain {
            id: self.id,
            normals: self.normals.clone(),
            offsets: self
                .normals
                .iter()
                .zip(&self.offsets)
                .map(|(n, c)| c + n.dot(shift))
                .collect(),
            vertices: self.vertices.iter().map(|p| p + shift).collect(),
            diameter_bound: self.diameter_bound,
        }
    }

    pub fn bounding_box(&self) -> (Vector<D>, Vector<D>) {
        let mut lo = Vector::<D>::repeat(f64::INFINITY);
        let mut hi = Vector::<D>::repeat(f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// The maximal open interval (t_in, t_out) ⊂ (0, ∞) with x + tv in the
    /// grain, or `None`. Grazing rays are misses; t_in is 0 when x is inside
    /// or on the boundary with v pointing inwards.
    pub fn intersect_ray(&self, x: &Vector<D>, v: &Vector<D>) -> Option<(f64, f64)> {
        let scale = 1.0 + x.amax() + self.diameter_bound;
        let tol = REL_TOL * scale;
        let mut lo: f64 = 0.0;
        let mut hi = f64::INFINITY;
        for (n, c) in self.normals.iter().zip(&self.offsets) {
            let a = n.dot(v);
            let b = c - n.dot(x);
            if a.abs() <= 1e-15 {
                if b <= tol {
                    return None;
                }
            } else if a > 0.0 {
                hi = hi.min(b / a);
            } else {
                lo = lo.max(b / a);
            }
            if hi <= lo + tol {
                return None;
            }
        }
        if lo <= tol {
            lo = 0.0;
        }
        Some((lo, hi))
    }

    /// Whether the open interiors of the two grains meet.
    pub fn overlaps(&self, other: &ConvexGrain<D>) -> bool {
        let normals: Vec<Vector<D>> = self.normals.iter().chain(&other.normals).copied().collect();
        let offsets: Vec<f64> = self.offsets.iter().chain(&other.offsets).copied().collect();
        let vertices = enumerate_vertices(&normals, &offsets);
        if vertices.len() < D + 1 {
            return false;
        }
        let centroid =
            vertices.iter().fold(Vector::<D>::zeros(), |a, p| a + p) / vertices.len() as f64;
        let slack = 1e-9 * (1.0 + self.diameter_bound);
        normals
            .iter()
            .zip(&offsets)
            .all(|(n, c)| n.dot(&centroid) < c - slack)
    }
}

fn enumerate_vertices<const D: usize>(normals: &[Vector<D>], offsets: &[f64]) -> Vec<Vector<D>> {
    let mut vertices: Vec<Vector<D>> = Vec::new();
    for subset in (0..normals.len()).combinations(D) {
        let rows: Vec<Vector<D>> = subset.iter().map(|&k| normals[k]).collect();
        let rhs: Vec<f64> = subset.iter().map(|&k| offsets[k]).collect();
        let Some(p) = solve(&rows, &rhs) else {
            continue;
        };
        let tol = 1e-9 * (1.0 + p.amax());
        if normals
            .iter()
            .zip(offsets)
            .all(|(n, c)| n.dot(&p) <= c + tol)
            && !vertices.iter().any(|q| (q - p).norm() <= tol)
        {
            vertices.push(p);
        }
    }
    vertices
}

/// Scatterer medium of one grain.
#[derive(Debug, Clone)]
pub enum Medium<const D: usize> {
    Crystal(AffineLattice<D>),
    Poisson,
}

impl<const D: usize> Medium<D> {
    pub fn is_crystal(&self) -> bool {
        matches!(self, Medium::Crystal(_))
    }
}

/// Axis-aligned box [lo, hi) tiled periodically over R^D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicBox<const D: usize> {
    pub lo: Vector<D>,
    pub hi: Vector<D>,
}

impl<const D: usize> PeriodicBox<D> {
    pub fn new(lo: Vector<D>, hi: Vector<D>) -> Result<Self> {
        if (0..D).any(|i| !(hi[i] > lo[i])) {
            return Err(Error::Geometry(format!(
                "periodic box needs lo < hi, got {lo:?}, {hi:?}"
            )));
        }
        Ok(PeriodicBox { lo, hi })
    }

    pub fn size(&self) -> Vector<D> {
        self.hi - self.lo
    }

    /// Integer cell containing x.
    pub fn cell(&self, x: &Vector<D>) -> [i64; D] {
        let l = self.size();
        std::array::from_fn(|i| ((x[i] - self.lo[i]) / l[i]).floor() as i64)
    }

    pub fn cell_shift(&self, cell: &[i64; D]) -> Vector<D> {
        let l = self.size();
        Vector::<D>::from_fn(|i, _| cell[i] as f64 * l[i])
    }

    /// Representative of x in [lo, hi).
    pub fn wrap(&self, x: &Vector<D>) -> Vector<D> {
        x - self.cell_shift(&self.cell(x))
    }
}

/// One visit of a ray to a grain: entry ℓ⁻ and exit ℓ⁺ along the ray.
/// `shift` is the translation of the periodic copy visited (zero otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<const D: usize> {
    pub grain: usize,
    pub entry: f64,
    pub exit: f64,
    pub shift: Vector<D>,
}

impl<const D: usize> Segment<D> {
    /// ℓ = ℓ⁺ − ℓ⁻.
    pub fn len(&self) -> f64 {
        self.exit - self.entry
    }

    pub fn is_empty(&self) -> bool {
        self.exit <= self.entry
    }
}

/// Grains, their media, an optional periodic box and the lattice anchor.
#[derive(Debug, Clone)]
pub struct Scene<const D: usize> {
    grains: Vec<ConvexGrain<D>>,
    media: Vec<Medium<D>>,
    periodic: Option<PeriodicBox<D>>,
    anchor: Vector<D>,
}

impl<const D: usize> Scene<D> {
    /// Validates and builds a scene. Grain ids are reassigned to list order.
    /// Crystal grains must fit the explicit kernel range.
    pub fn new(
        grains: Vec<ConvexGrain<D>>,
        media: Vec<Medium<D>>,
        periodic: Option<PeriodicBox<D>>,
        anchor: Vector<D>,
    ) -> Result<Self> {
        let scene = Self::microscopic(grains, media, periodic, anchor)?;
        scene.check_kernel_range()?;
        Ok(scene)
    }

    /// Like [`Scene::new`] without the kernel range check. Such scenes can
    /// be simulated microscopically, but the limit densities refuse them.
    pub fn microscopic(
        grains: Vec<ConvexGrain<D>>,
        media: Vec<Medium<D>>,
        periodic: Option<PeriodicBox<D>>,
        anchor: Vector<D>,
    ) -> Result<Self> {
        if D != 2 && D != 3 {
            return Err(Error::Geometry(format!(
                "scenes exist in d = 2 or 3, got {D}"
            )));
        }
        if grains.len() != media.len() {
            return Err(Error::Geometry(format!(
                "{} grains but {} media",
                grains.len(),
                media.len()
            )));
        }
        let mut grains = grains;
        for (i, g) in grains.iter_mut().enumerate() {
            g.id = i;
        }
        for (a, b) in grains.iter().tuple_combinations() {
            if a.overlaps(b) {
                return Err(Error::Geometry(format!(
                    "grains {} and {} overlap",
                    a.id, b.id
                )));
            }
        }
        if let Some(pb) = &periodic {
            let slack = 1e-9 * (1.0 + pb.size().amax());
            for g in &grains {
                for p in g.vertices() {
                    if (0..D).any(|i| p[i] < pb.lo[i] - slack || p[i] > pb.hi[i] + slack) {
                        return Err(Error::Geometry(format!(
                            "grain {} leaves the periodic box",
                            g.id
                        )));
                    }
                }
            }
        }
        Ok(Scene {
            grains,
            media,
            periodic,
            anchor,
        })
    }

    /// Crystal grain diameters must not exceed the explicit kernel range.
    pub fn check_kernel_range(&self) -> Result<()> {
        let max = explicit_range(D);
        for (g, m) in self.grains.iter().zip(&self.media) {
            if m.is_crystal() && g.diameter_bound > max * (1.0 + 1e-12) {
                return Err(Error::Geometry(format!(
                    "crystal grain {} has diameter {} beyond the explicit kernel range {max}",
                    g.id, g.diameter_bound
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        D
    }

    pub fn grains(&self) -> &[ConvexGrain<D>] {
        &self.grains
    }

    pub fn media(&self) -> &[Medium<D>] {
        &self.media
    }

    pub fn periodic(&self) -> Option<&PeriodicBox<D>> {
        self.periodic.as_ref()
    }

    pub fn anchor(&self) -> &Vector<D> {
        &self.anchor
    }

    /// Largest grain diameter.
    pub fn max_diameter(&self) -> f64 {
        self.grains
            .iter()
            .map(|g| g.diameter_bound)
            .fold(0.0, f64::max)
    }

    /// Diameter of the union of grains (of the box when periodic).
    pub fn extent(&self) -> f64 {
        if let Some(pb) = &self.periodic {
            return pb.size().norm();
        }
        let mut lo = Vector::<D>::repeat(f64::INFINITY);
        let mut hi = Vector::<D>::repeat(f64::NEG_INFINITY);
        for g in &self.grains {
            let (a, b) = g.bounding_box();
            lo = lo.inf(&a);
            hi = hi.sup(&b);
        }
        (hi - lo).norm()
    }

    /// Same scene with every grain inflated by r; the result may overlap
    /// and is only used for candidate searches.
    pub fn inflated(&self, r: f64) -> Scene<D> {
        Scene {
            grains: self.grains.iter().map(|g| g.inflated(r)).collect(),
            media: self.media.clone(),
            periodic: self.periodic,
            anchor: self.anchor,
        }
    }

    /// Lazy itinerary of the ray x + tv over entries ℓ⁻ < horizon.
    pub fn itinerary_iter(&self, x: &Vector<D>, v: &Vector<D>, horizon: f64) -> Itinerary<'_, D> {
        Itinerary::new(self, *x, *v, horizon)
    }

    /// All segments with ℓ⁻ < horizon, ordered by entry.
    pub fn itinerary(&self, x: &Vector<D>, v: &Vector<D>, horizon: f64) -> Result<Vec<Segment<D>>> {
        if !(horizon > 0.0) || (self.periodic.is_some() && !horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "itinerary horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(self.itinerary_iter(x, v, horizon).collect())
    }

    /// Length of {x + tv : 0 ≤ t ≤ ξ} outside every grain.
    pub fn gap(&self, x: &Vector<D>, v: &Vector<D>, xi: f64) -> f64 {
        if !(xi > 0.0) {
            return 0.0;
        }
        let covered: f64 = self
            .itinerary_iter(x, v, xi)
            .map(|s| s.exit.min(xi) - s.entry)
            .sum();
        (xi - covered).clamp(0.0, xi)
    }

    /// True iff x is in a grain, or on its boundary with v pointing inwards.
    pub fn inside_indicator(&self, x: &Vector<D>, v: &Vector<D>) -> bool {
        self.first_entry_is_zero(x, v)
    }

    fn first_entry_is_zero(&self, x: &Vector<D>, v: &Vector<D>) -> bool {
        let (x, shifted) = match &self.periodic {
            Some(pb) => (pb.wrap(x), true),
            None => (*x, false),
        };
        let mut found = self
            .grains
            .iter()
            .any(|g| matches!(g.intersect_ray(&x, v), Some((t, _)) if t == 0.0));
        if !found && shifted {
            // x may sit on the far face of a grain in the neighbouring copy
            let pb = self.periodic.as_ref().expect("checked above");
            found = neighbor_cells::<D>().any(|c| {
                let s = pb.cell_shift(&c);
                let xs = x - s;
                self.grains
                    .iter()
                    .any(|g| matches!(g.intersect_ray(&xs, v), Some((t, _)) if t == 0.0))
            });
        }
        found
    }

    /// Index of the grain containing x in its interior (wrapped when periodic).
    pub fn locate(&self, x: &Vector<D>) -> Option<usize> {
        let x = match &self.periodic {
            Some(pb) => pb.wrap(x),
            None => *x,
        };
        self.grains.iter().position(|g| g.contains(&x))
    }
}

/// The 3^D cell offsets {-1, 0, 1}^D.
pub fn neighbor_cells<const D: usize>() -> impl Iterator<Item = [i64; D]> {
    (0..3usize.pow(D as u32)).map(|mut n| {
        std::array::from_fn(|_| {
            let c = (n % 3) as i64 - 1;
            n /= 3;
            c
        })
    })
}

/// Lazy iterator over itinerary segments.
pub struct Itinerary<'a, const D: usize> {
    scene: &'a Scene<D>,
    x: Vector<D>,
    v: Vector<D>,
    horizon: f64,
    buffer: Vec<Segment<D>>,
    next: usize,
    last_exit: f64,
    walker: Option<CellWalker<D>>,
}

/// Amanatides–Woo traversal of periodic box cells.
struct CellWalker<const D: usize> {
    cell: [i64; D],
    t_next: [f64; D],
    t_delta: [f64; D],
    step: [i64; D],
    t_cell: f64,
}

impl<'a, const D: usize> Itinerary<'a, D> {
    fn new(scene: &'a Scene<D>, x: Vector<D>, v: Vector<D>, horizon: f64) -> Self {
        let mut it = Itinerary {
            scene,
            x,
            v,
            horizon,
            buffer: Vec::new(),
            next: 0,
            last_exit: 0.0,
            walker: None,
        };
        match &scene.periodic {
            None => {
                it.buffer = scene
                    .grains
                    .iter()
                    .enumerate()
                    .filter_map(|(i, g)| {
                        g.intersect_ray(&x, &v).map(|(a, b)| Segment {
                            grain: i,
                            entry: a,
                            exit: b,
                            shift: Vector::<D>::zeros(),
                        })
                    })
                    .filter(|s| s.entry < horizon)
                    .collect();
                it.buffer.sort_by(|a, b| a.entry.total_cmp(&b.entry));
            }
            Some(pb) => {
                let cell = pb.cell(&x);
                let l = pb.size();
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
                it.walker = Some(CellWalker {
                    cell,
                    t_next,
                    t_delta,
                    step,
                    t_cell: 0.0,
                });
                it.fill_cell();
            }
        }
        it
    }

    /// Loads the segments of the current cell and advances the walker.
    fn fill_cell(&mut self) {
        let pb = *self.scene.periodic.as_ref().expect("periodic walker");
        loop {
            let w = self.walker.as_mut().expect("walker present");
            if w.t_cell >= self.horizon {
                return;
            }
            let shift = pb.cell_shift(&w.cell);
            let xs = self.x - shift;
            self.buffer.clear();
            self.next = 0;
            for (i, g) in self.scene.grains.iter().enumerate() {
                if let Some((a, b)) = g.intersect_ray(&xs, &self.v) {
                    if a < self.horizon {
                        self.buffer.push(Segment {
                            grain: i,
                            entry: a,
                            exit: b,
                            shift,
                        });
                    }
                }
            }
            self.buffer.sort_by(|a, b| a.entry.total_cmp(&b.entry));
            // advance to the next cell
            let axis = (0..D)
                .min_by(|&a, &b| w.t_next[a].total_cmp(&w.t_next[b]))
                .expect("D >= 1");
            w.t_cell = w.t_next[axis];
            w.cell[axis] += w.step[axis];
            w.t_next[axis] += w.t_delta[axis];
            if !self.buffer.is_empty() || !w.t_cell.is_finite() {
                return;
            }
        }
    }
}

impl<const D: usize> Iterator for Itinerary<'_, D> {
    type Item = Segment<D>;

    fn next(&mut self) -> Option<Segment<D>> {
        loop {
            if self.next < self.buffer.len() {
                let mut s = self.buffer[self.next];
                self.next += 1;
                if s.entry >= self.horizon {
                    return None;
                }
                let tol = REL_TOL * (1.0 + s.entry.abs());
                if s.entry < self.last_exit + tol {
                    // chain adjacent grains without spurious gaps
                    s.entry = self.last_exit;
                    if s.exit <= s.entry + tol {
                        continue;
                    }
                }
                self.last_exit = s.exit;
                return Some(s);
            }
            match &self.walker {
                Some(w) if w.t_cell < self.horizon && w.t_cell.is_finite() => self.fill_cell(),
                _ => return None,
            }
            if self.next >= self.buffer.len() {
                return None;
            }
        }
    }
}
