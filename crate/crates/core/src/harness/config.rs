//! Experiment configuration (TOML). Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ball::BallPoint;
use crate::error::{Error, Result};
use crate::flight::{SamplingRegime, SpatialLaw};
use crate::geometry::{ConvexGrain, Medium, PeriodicBox, Scene};
use crate::lattice::{
    bcc_matrix, is_commensurable, rotation_2d, rotation_3d, AffineLattice, RationalForm,
};
use crate::microsim::{Beta, DirectionLaw};
use crate::{Matrix, Vector};

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Freepath,
    Transition,
    Flight,
    Stationarity,
    PoissonBaseline,
    KernelTables,
    Psi,
    Microsim,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Freepath => "freepath",
            ExperimentKind::Transition => "transition",
            ExperimentKind::Flight => "flight",
            ExperimentKind::Stationarity => "stationarity",
            ExperimentKind::PoissonBaseline => "poisson-baseline",
            ExperimentKind::KernelTables => "kernel-tables",
            ExperimentKind::Psi => "psi",
            ExperimentKind::Microsim => "microsim",
        }
    }
}

/// Top-level document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub r_schedule: Vec<f64>,
    pub scene: SceneSpec,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default)]
    pub directions: DirectionSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub transition: TransitionSpec,
    #[serde(default)]
    pub flight: FlightSpec,
    #[serde(default)]
    pub poisson: PoissonSpec,
    #[serde(default)]
    pub tables: TableSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub grains: Vec<GrainSpec>,
    #[serde(default)]
    pub periodic: Option<BoxSpec>,
    /// Lattice anchor when the start position does not fix one.
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
    /// Accept crystal pairs whose commensurability cannot be decided.
    #[serde(default)]
    pub assume_incommensurable: bool,
    /// Accept crystal pairs that are provably commensurable.
    #[serde(default)]
    pub allow_commensurable: bool,
}

impl SceneSpec {
    /// Per-grain flags for crystals in random-offset mode.
    pub fn random_offsets(&self) -> Vec<bool> {
        self.grains
            .iter()
            .map(|g| {
                g.lattice
                    .as_ref()
                    .is_some_and(|l| l.mode == LatticeMode::RandomOffset)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// One grain: exactly one of `cuboid`, `vertices`, `halfspaces`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrainSpec {
    #[serde(default)]
    pub cuboid: Option<BoxSpec>,
    #[serde(default)]
    pub vertices: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub halfspaces: Option<Vec<HalfspaceSpec>>,
    pub medium: MediumSpec,
    #[serde(default)]
    pub lattice: Option<LatticeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumSpec {
    Crystal,
    Poisson,
}

/// Lattice matrix M (rows) and shift ω. Exactly one of `rows` (exact
/// rationals such as "1/2"), `matrix` (floats) or `preset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(default)]
    pub rows: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub preset: Option<LatticePreset>,
    /// Scale a rational matrix to determinant one.
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default)]
    pub rotation: Option<RotationSpec>,
    #[serde(default, alias = "offset")]
    pub omega: Option<Vec<f64>>,
    #[serde(default)]
    pub mode: LatticeMode,
}

/// How a crystal's offset ω is chosen in microscopic runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeMode {
    /// ω as given, centres anchored at the start.
    #[default]
    Anchored,
    /// ω uniform on [0, 1)^d, redrawn for every sample.
    RandomOffset,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticePreset {
    Integer,
    Bcc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSpec {
    pub angle: f64,
    /// Required in d = 3.
    #[serde(default)]
    pub axis: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetMode {
    /// q as given (default zero), lattices anchored at the start.
    #[default]
    Anchored,
    /// q uniform on [0, 1)^d, drawn once per run.
    RandomOffset,
    /// Start on a scatterer of the grain containing x.
    OnScatterer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    /// Fixed start x.
    #[serde(default)]
    pub position: Option<Vec<f64>>,
    /// Uniform random starts (one per sample); excludes `position`.
    #[serde(default)]
    pub region: Option<BoxSpec>,
    #[serde(default)]
    pub mode: OffsetMode,
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    /// Exit parameter s of β(v) for on-scatterer starts; default 0 (β = v).
    #[serde(default)]
    pub beta_exit: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DirectionKind {
    #[default]
    Uniform,
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    #[serde(default)]
    pub law: DirectionKind,
    #[serde(default)]
    pub axis: Option<Vec<f64>>,
    #[serde(default)]
    pub cos_half_angle: Option<f64>,
}

/// Acceptance thresholds. The limit laws come without rates, so these are
/// calibrated defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// KS distance required at the smallest r of a free path study.
    pub ks_final: f64,
    /// Significance level of every hypothesis test.
    pub alpha: f64,
    /// KS distance for Poisson free paths against the exact limit.
    pub ks_poisson: f64,
    /// Relative error of the no-collision fraction.
    pub n0_relative: f64,
    /// Minimum expected count per chi-square cell (smaller cells are pooled).
    pub min_expected: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ks_final: 0.02,
            alpha: 0.01,
            ks_poisson: 0.005,
            n0_relative: 0.02,
            min_expected: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Direction nodes (d = 2) or polar nodes (d = 3).
    pub directions: usize,
    /// Grid points of tabulated CDFs.
    pub grid_points: usize,
    /// Nodes per axis for spatial averages.
    pub spatial_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            directions: 4096,
            grid_points: 4001,
            spatial_nodes: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionSpec {
    pub xi_edges: Vec<f64>,
    /// Impact regions: equal intervals (d = 2) or equal-area annuli (d = 3).
    pub regions: usize,
}

impl Default for TransitionSpec {
    fn default() -> Self {
        TransitionSpec {
            xi_edges: vec![0.0, 0.1, 0.2, 0.35, 0.6],
            regions: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FlightReport {
    #[default]
    Marginals,
    Ncollision,
    Stationarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlightSpec {
    pub time: f64,
    pub report: FlightReport,
    pub regime: SamplingRegime,
    /// Initial positions; defaults to the periodic box.
    pub region: Option<BoxSpec>,
    /// Independent repetitions of the stationarity test.
    pub repetitions: usize,
    /// First leg of the semigroup split test.
    pub split: f64,
    pub bins: usize,
}

impl Default for FlightSpec {
    fn default() -> Self {
        FlightSpec {
            time: 2.5,
            report: FlightReport::Marginals,
            regime: SamplingRegime::Auto,
            region: None,
            repetitions: 10,
            split: 1.0,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonSpec {
    /// Time window of the collision count test.
    pub count_time: f64,
    /// Bins of the previous velocity in the memorylessness test.
    pub velocity_bins: usize,
    pub xi_bins: usize,
    /// Independent Poisson realizations the samples are split across.
    pub realizations: usize,
}

impl Default for PoissonSpec {
    fn default() -> Self {
        PoissonSpec {
            count_time: 1.0,
            velocity_bins: 8,
            xi_bins: 10,
            realizations: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableSpec {
    pub points: usize,
    /// |w| (and |z|) values of the parameter columns.
    pub params: Vec<f64>,
    /// Direction of a `psi` table.
    pub direction: Option<Vec<f64>>,
}

impl Default for TableSpec {
    fn default() -> Self {
        TableSpec {
            points: 101,
            params: vec![0.0, 0.5, 1.0],
            direction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Write per-sample tables.
    pub samples: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { samples: true }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return cfg_err(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.samples < 1000 {
            return cfg_err(format!(
                "samples must be at least 1000, got {}",
                self.samples
            ));
        }
        if self.r_schedule.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return cfg_err("every radius of r_schedule must lie in (0, 1)");
        }
        if self.r_schedule.windows(2).any(|w| !(w[0] > w[1])) {
            return cfg_err("r_schedule must be strictly decreasing");
        }
        let needs_r = matches!(
            self.experiment,
            ExperimentKind::Freepath
                | ExperimentKind::Transition
                | ExperimentKind::PoissonBaseline
                | ExperimentKind::Microsim
        );
        if needs_r && self.r_schedule.is_empty() {
            return cfg_err(format!(
                "{} needs a non-empty r_schedule",
                self.experiment.name()
            ));
        }
        if self.scene.grains.is_empty() {
            return cfg_err("scene needs at least one grain");
        }
        if self.start.position.is_some() && self.start.region.is_some() {
            return cfg_err("start.position and start.region are exclusive");
        }
        if self.start.region.is_some() && self.start.mode != OffsetMode::Anchored {
            return cfg_err("random start regions use anchored mode");
        }
        let t = &self.thresholds;
        if !(t.alpha > 0.0 && t.alpha < 1.0)
            || !(t.ks_final > 0.0)
            || !(t.ks_poisson > 0.0)
            || !(t.n0_relative > 0.0)
        {
            return cfg_err("thresholds must be positive and alpha in (0, 1)");
        }
        let q = &self.quadrature;
        if q.directions == 0 || q.grid_points < 2 || q.spatial_nodes == 0 {
            return cfg_err("quadrature sizes must be positive");
        }
        let f = &self.flight;
        if !(f.time > 0.0)
            || f.repetitions == 0
            || !(f.split > 0.0 && f.split < f.time)
            || f.bins < 2
        {
            return cfg_err(
                "flight needs time > 0, 0 < split < time, repetitions >= 1 and bins >= 2",
            );
        }
        if self.transition.regions == 0 || self.transition.xi_edges.len() < 2 {
            return cfg_err("transition needs at least one region and two xi edges");
        }
        let p = &self.poisson;
        if !(p.count_time > 0.0) || p.velocity_bins < 2 || p.xi_bins < 2 {
            return cfg_err("poisson needs count_time > 0 and at least two bins per axis");
        }
        if p.realizations == 0 || p.realizations > self.samples {
            return cfg_err("poisson realizations must be between 1 and the sample count");
        }
        if self.tables.points < 2 {
            return cfg_err("tables need at least two points");
        }
        Ok(())
    }
}

pub(crate) fn vector<const D: usize>(v: &[f64], what: &str) -> Result<Vector<D>> {
    if v.len() != D || v.iter().any(|x| !x.is_finite()) {
        return cfg_err(format!("{what} must have {D} finite components, got {v:?}"));
    }
    Ok(Vector::<D>::from_fn(|i, _| v[i]))
}

pub(crate) fn box_law<const D: usize>(b: &BoxSpec, what: &str) -> Result<(Vector<D>, Vector<D>)> {
    let lo = vector::<D>(&b.lo, what)?;
    let hi = vector::<D>(&b.hi, what)?;
    if (0..D).any(|i| !(lo[i] < hi[i])) {
        return cfg_err(format!("{what} needs lo < hi componentwise"));
    }
    Ok((lo, hi))
}

fn lattice<const D: usize>(spec: &LatticeSpec, grain: usize) -> Result<AffineLattice<D>> {
    let omega = match &spec.omega {
        Some(w) => vector::<D>(w, "lattice omega")?,
        None => Vector::<D>::zeros(),
    };
    let given =
        spec.rows.is_some() as u8 + spec.matrix.is_some() as u8 + spec.preset.is_some() as u8;
    if given != 1 {
        return cfg_err(format!(
            "grain {grain}: lattice needs exactly one of rows, matrix, preset"
        ));
    }
    let base = if let Some(rows) = &spec.rows {
        AffineLattice::from_rational(RationalForm::parse(rows)?, spec.normalize, omega)?
    } else if let Some(m) = &spec.matrix {
        if m.len() != D || m.iter().any(|r| r.len() != D) {
            return cfg_err(format!("grain {grain}: lattice matrix must be {D}×{D}"));
        }
        AffineLattice::new(Matrix::<D>::from_fn(|i, j| m[i][j]), omega)?
    } else {
        match spec.preset {
            Some(LatticePreset::Integer) => AffineLattice::integer(omega),
            Some(LatticePreset::Bcc) if D == 3 => {
                let b = bcc_matrix();
                AffineLattice::new(Matrix::<D>::from_fn(|i, j| b[(i, j)]), omega)?
            }
            _ => return cfg_err(format!("grain {grain}: the bcc preset needs d = 3")),
        }
    };
    match &spec.rotation {
        None => Ok(base),
        Some(rot) => {
            let k: Matrix<D> = if D == 2 {
                let r = rotation_2d(rot.angle);
                Matrix::<D>::from_fn(|i, j| r[(i, j)])
            } else {
                let axis = match &rot.axis {
                    Some(a) => vector::<3>(a, "rotation axis")?,
                    None => {
                        return cfg_err(format!("grain {grain}: rotations in d = 3 need an axis"))
                    }
                };
                let r = rotation_3d(&axis, rot.angle)?;
                Matrix::<D>::from_fn(|i, j| r[(i, j)])
            };
            base.rotated(&k)
        }
    }
}

fn grain<const D: usize>(spec: &GrainSpec, id: usize) -> Result<ConvexGrain<D>> {
    let given = spec.cuboid.is_some() as u8
        + spec.vertices.is_some() as u8
        + spec.halfspaces.is_some() as u8;
    if given != 1 {
        return cfg_err(format!(
            "grain {id} needs exactly one of cuboid, vertices, halfspaces"
        ));
    }
    if let Some(b) = &spec.cuboid {
        let (lo, hi) = box_law::<D>(b, "cuboid")?;
        ConvexGrain::cuboid(id, &lo, &hi)
    } else if let Some(vs) = &spec.vertices {
        let pts = vs
            .iter()
            .map(|v| vector::<D>(v, "vertex"))
            .collect::<Result<Vec<_>>>()?;
        ConvexGrain::from_vertices(id, &pts)
    } else {
        let hs = spec
            .halfspaces
            .as_ref()
            .expect("checked above")
            .iter()
            .map(|h| Ok((vector::<D>(&h.normal, "halfspace normal")?, h.offset)))
            .collect::<Result<Vec<_>>>()?;
        ConvexGrain::from_halfspaces(id, &hs)
    }
}

/// Builds the scene and enforces the lattice genericity policy. Lattices
/// are anchored at `anchor`.
pub fn build_scene<const D: usize>(spec: &SceneSpec, anchor: Vector<D>) -> Result<Scene<D>> {
    let mut grains = Vec::new();
    let mut media = Vec::new();
    for (i, g) in spec.grains.iter().enumerate() {
        grains.push(grain::<D>(g, i)?);
        media.push(match (g.medium, &g.lattice) {
            (MediumSpec::Poisson, None) => Medium::Poisson,
            (MediumSpec::Poisson, Some(_)) => {
                return cfg_err(format!("grain {i}: Poisson media take no lattice"))
            }
            (MediumSpec::Crystal, Some(l)) => Medium::Crystal(lattice::<D>(l, i)?),
            (MediumSpec::Crystal, None) => {
                return cfg_err(format!("grain {i}: crystal media need a lattice"))
            }
        });
    }
    let crystals: Vec<(usize, &AffineLattice<D>)> = media
        .iter()
        .enumerate()
        .filter_map(|(i, m)| match m {
            Medium::Crystal(l) => Some((i, l)),
            Medium::Poisson => None,
        })
        .collect();
    for (a, (i, la)) in crystals.iter().enumerate() {
        for (j, lb) in &crystals[a + 1..] {
            match is_commensurable(la, lb) {
                Ok(true) if !spec.allow_commensurable => {
                    return cfg_err(format!(
                        "crystal grains {i} and {j} have commensurable lattices; set allow_commensurable to accept"
                    ))
                }
                Err(Error::Undecidable(_)) if !spec.assume_incommensurable => {
                    return cfg_err(format!(
                        "commensurability of grains {i} and {j} is undecidable on float input; \
                         set assume_incommensurable to accept"
                    ))
                }
                Err(Error::Undecidable(_)) | Ok(_) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let periodic = match &spec.periodic {
        Some(b) => {
            let (lo, hi) = box_law::<D>(b, "periodic box")?;
            Some(PeriodicBox::new(lo, hi)?)
        }
        None => None,
    };
    Scene::new(grains, media, periodic, anchor)
}

/// Resolved start specification.
#[derive(Debug, Clone)]
pub struct Start<const D: usize> {
    pub position: SpatialLaw<D>,
    pub mode: OffsetMode,
    pub q: Option<Vector<D>>,
    pub beta: Beta,
}

impl<const D: usize> Start<D> {
    /// Lattice anchor: the start point when fixed.
    pub fn anchor(&self, scene: &SceneSpec) -> Result<Vector<D>> {
        match (&self.position, &scene.anchor) {
            (SpatialLaw::Point(x), _) => Ok(*x),
            (_, Some(a)) => vector::<D>(a, "scene anchor"),
            _ => Ok(Vector::<D>::zeros()),
        }
    }
}

pub fn build_start<const D: usize>(
    spec: &StartSpec,
    periodic: Option<&BoxSpec>,
) -> Result<Start<D>> {
    let position = match (&spec.position, &spec.region) {
        (Some(p), None) => SpatialLaw::Point(vector::<D>(p, "start position")?),
        (None, Some(b)) => {
            let (lo, hi) = box_law::<D>(b, "start region")?;
            SpatialLaw::Box { lo, hi }
        }
        (None, None) => match periodic {
            Some(b) => {
                let (lo, hi) = box_law::<D>(b, "periodic box")?;
                SpatialLaw::Box { lo, hi }
            }
            None => return cfg_err("start needs a position or a region"),
        },
        (Some(_), Some(_)) => return cfg_err("start.position and start.region are exclusive"),
    };
    let q = match (&spec.q, spec.mode) {
        (Some(q), OffsetMode::Anchored) => Some(vector::<D>(q, "start q")?),
        (Some(_), _) => return cfg_err("start.q is only used in anchored mode"),
        (None, _) => None,
    };
    let beta = match (spec.mode, &spec.beta_exit) {
        (OffsetMode::OnScatterer, Some(s)) => Beta::Exit(BallPoint::new(s)?),
        (OffsetMode::OnScatterer, None) => Beta::forward(D)?,
        (_, Some(_)) => return cfg_err("start.beta_exit needs on-scatterer mode"),
        (_, None) => Beta::Zero,
    };
    if spec.mode == OffsetMode::OnScatterer && !matches!(position, SpatialLaw::Point(_)) {
        return cfg_err("on-scatterer starts need a fixed position");
    }
    Ok(Start {
        position,
        mode: spec.mode,
        q,
        beta,
    })
}

pub fn build_directions<const D: usize>(spec: &DirectionSpec) -> Result<DirectionLaw<D>> {
    let law = match spec.law {
        DirectionKind::Uniform => {
            if spec.axis.is_some() || spec.cos_half_angle.is_some() {
                return cfg_err("uniform directions take no axis or cos_half_angle");
            }
            DirectionLaw::Uniform
        }
        DirectionKind::Cap => {
            let axis = match &spec.axis {
                Some(a) => vector::<D>(a, "cap axis")?,
                None => return cfg_err("cap directions need an axis"),
            };
            let n = axis.norm();
            if !(n > 0.0) {
                return cfg_err("cap axis must be nonzero");
            }
            let c = spec
                .cos_half_angle
                .ok_or_else(|| Error::Config("cap directions need cos_half_angle".into()))?;
            DirectionLaw::Cap {
                axis: axis / n,
                cos_half_angle: c,
            }
        }
    };
    law.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(law)
}
