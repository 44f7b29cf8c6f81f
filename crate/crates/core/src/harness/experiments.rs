use std::collections::BTreeMap;
use std::ops::Range;
use std::time::Instant;

use rand::RngCore;
use serde_json::{json, Value};

use super::config::{
    box_law, build_directions, build_scene, build_start, vector, ExperimentConfig, ExperimentKind,
    FlightReport, OffsetMode, Start,
};
use super::{fmt, summary, Report, Table};
use crate::ball::BallPoint;
use crate::error::{Error, Result};
use crate::flight::{ExtendedState, FlightProcess, InitialLaw, SpatialLaw};
use crate::geometry::{Medium, Scene};
use crate::kernels::{sigma_bar, KernelModel};
use crate::limits::{
    box_nodes, cell_masses, no_collision_fraction, DirectionRule, ImpactRegion, LimitCdf,
};
use crate::microsim::{DirectionLaw, FreePathSample, MicroConfig, MicroScene};
use crate::polykernel::PolyKernel;
use crate::rng::{substream, uniform_box, StreamRng};
use crate::scattering::exit_param;
use crate::stats::{
    bin_index, chi_square_gof, chi_square_independence, fisher_combine, ks_one_sample,
    ks_two_sample, quantile_edges, TestResult,
};
use crate::Vector;

/// Stream index for seeds of independent flight ensembles.
const ENSEMBLE_STREAM: u64 = 1 << 61;
/// Stream index for Poisson baseline trajectories.
const TRAJECTORY_SEED_STREAM: u64 = (1 << 61) + (1 << 40);
/// Cap on trajectories of the Poisson memorylessness and count tests.
const MAX_TRAJECTORIES: usize = 200_000;
/// Stream index for the seeds of further Poisson realizations.
const REALIZATION_STREAM: u64 = (1 << 61) + (1 << 50);

/// Runs the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.dim {
        2 => run_dim::<2>(cfg),
        3 => run_dim::<3>(cfg),
        d => Err(Error::Config(format!("dim must be 2 or 3, got {d}"))),
    }
}

struct Clock(BTreeMap<String, f64>);

impl Clock {
    fn time<T>(&mut self, what: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.0.entry(what.to_string()).or_insert(0.0) += t.elapsed().as_secs_f64();
        out
    }
}

struct Setup<const D: usize> {
    scene: Scene<D>,
    start: Start<D>,
    law: DirectionLaw<D>,
}

fn setup<const D: usize>(cfg: &ExperimentConfig) -> Result<Setup<D>> {
    let start = build_start::<D>(&cfg.start, cfg.scene.periodic.as_ref())?;
    let scene = build_scene::<D>(&cfg.scene, start.anchor(&cfg.scene)?)?;
    let law = build_directions::<D>(&cfg.directions)?;
    Ok(Setup { scene, start, law })
}

fn run_dim<const D: usize>(cfg: &ExperimentConfig) -> Result<Report> {
    let mut clock = Clock(BTreeMap::new());
    let (results, verdicts, tables) = match cfg.experiment {
        ExperimentKind::Freepath => freepath::<D>(cfg, &mut clock, false)?,
        ExperimentKind::Transition => transition::<D>(cfg, &mut clock)?,
        ExperimentKind::Microsim => freepath::<D>(cfg, &mut clock, true)?,
        ExperimentKind::PoissonBaseline => poisson_baseline::<D>(cfg, &mut clock)?,
        ExperimentKind::Flight => flight::<D>(cfg, cfg.flight.report, &mut clock)?,
        ExperimentKind::Stationarity => flight::<D>(cfg, FlightReport::Stationarity, &mut clock)?,
        ExperimentKind::KernelTables => kernel_tables::<D>(cfg)?,
        ExperimentKind::Psi => psi_table::<D>(cfg)?,
    };
    Ok(Report {
        experiment: cfg.experiment,
        summary: summary(cfg, results, verdicts),
        tables,
        timings: clock.0,
    })
}

type Outcome = (Value, BTreeMap<String, bool>, Vec<Table>);

fn rule_resolution(dim: usize, nodes: usize) -> usize {
    if dim == 2 {
        nodes
    } else {
        ((nodes as f64 / 2.0).sqrt().round() as usize).max(1)
    }
}

fn test_json(t: &TestResult) -> Value {
    json!({ "statistic": t.statistic, "p_value": t.p_value, "size": t.size })
}

/// Contiguous sample id ranges, one per Poisson realization.
fn batches(n: usize, k: usize) -> Vec<Range<usize>> {
    let k = k.clamp(1, n.max(1));
    (0..k).map(|b| b * n / k..(b + 1) * n / k).collect()
}

/// Micro scene of realization `b`. Realization 0 uses the run seed; the
/// start offset q is shared by all realizations.
fn realization<const D: usize>(
    cfg: &ExperimentConfig,
    s: &Setup<D>,
    r: f64,
    b: usize,
) -> Result<(MicroConfig<D>, MicroScene<D>)> {
    let mut mc = MicroConfig::<D>::new(r, cfg.seed)?;
    mc.beta = s.start.beta.clone();
    mc.random_offsets = cfg.scene.random_offsets();
    if b > 0 {
        mc.q = Some(mc.offset_q());
        mc.seed = substream(cfg.seed, REALIZATION_STREAM + b as u64).next_u64();
    }
    let anchor = s.start.anchor(&cfg.scene)?;
    let micro = MicroScene::new(&s.scene, &mc, &anchor)?;
    Ok((mc, micro))
}

/// Free path samples with ids in `ids` against one micro scene.
fn batch_samples<const D: usize>(
    cfg: &ExperimentConfig,
    s: &Setup<D>,
    mc: &MicroConfig<D>,
    micro: &MicroScene<D>,
    ids: Range<usize>,
) -> Result<Vec<FreePathSample<D>>> {
    Ok(match &s.start.position {
        SpatialLaw::Point(x) => {
            let q = match s.start.mode {
                OffsetMode::Anchored => s.start.q.unwrap_or_else(Vector::<D>::zeros),
                OffsetMode::RandomOffset => mc.offset_q(),
                OffsetMode::OnScatterer => {
                    let grain = s.scene.locate(x).ok_or_else(|| {
                        Error::Config("on-scatterer starts need a position inside a grain".into())
                    })?;
                    if mc.random_offsets.get(grain).copied().unwrap_or(false) {
                        return Err(Error::Config(
                            "on-scatterer starts need an anchored lattice in the start grain"
                                .into(),
                        ));
                    }
                    micro.on_scatterer_offset(grain)?
                }
            };
            micro.sample_free_paths(x, &q, &s.start.beta, &s.law, ids, cfg.seed)?
        }
        SpatialLaw::Box { lo, hi } => {
            let law = s.law.clone();
            let (lo, hi) = (*lo, *hi);
            micro.sample_free_paths_with(ids, cfg.seed, move |rng: &mut StreamRng| {
                let x = uniform_box(rng, &lo, &hi);
                (x, law.sample(rng))
            })
        }
    })
}

/// Free path samples for one radius, split across the Poisson
/// realizations. Also returns ε and the scatterer counts per realization.
fn micro_samples<const D: usize>(
    cfg: &ExperimentConfig,
    s: &Setup<D>,
    r: f64,
) -> Result<(f64, Vec<Vec<usize>>, Vec<FreePathSample<D>>)> {
    let mut samples = Vec::with_capacity(cfg.samples);
    let mut counts = Vec::new();
    let mut epsilon = 0.0;
    for (b, ids) in batches(cfg.samples, cfg.poisson.realizations)
        .into_iter()
        .enumerate()
    {
        let (mc, micro) = realization(cfg, s, r, b)?;
        epsilon = micro.epsilon();
        counts.push(micro.poisson_counts());
        samples.extend(batch_samples(cfg, s, &mc, &micro, ids)?);
    }
    Ok((epsilon, counts, samples))
}

fn limit_cdf<const D: usize>(
    cfg: &ExperimentConfig,
    s: &Setup<D>,
    kernel: &PolyKernel<D>,
) -> Result<LimitCdf> {
    let rule = DirectionRule::new(&s.law, rule_resolution(D, cfg.quadrature.directions))?;
    match &s.start.position {
        SpatialLaw::Point(x) => LimitCdf::free_path(
            kernel,
            x,
            &rule,
            s.start.beta.exit_param(),
            cfg.quadrature.grid_points,
        ),
        SpatialLaw::Box { lo, hi } => {
            let nodes = box_nodes(lo, hi, cfg.quadrature.spatial_nodes);
            LimitCdf::free_path_averaged(kernel, &nodes, &rule, cfg.quadrature.grid_points)
        }
    }
}

fn sample_table<const D: usize>(r: f64, samples: &[FreePathSample<D>], table: &mut Table) {
    for p in samples {
        let mut row = vec![
            p.id.to_string(),
            fmt(r),
            fmt(p.tau),
            p.grain.map_or(String::new(), |g| g.to_string()),
        ];
        for k in 0..D - 1 {
            row.push(
                p.impact
                    .as_ref()
                    .map_or(String::new(), |w| fmt(w.as_slice()[k])),
            );
        }
        row.push(u8::from(p.escaped()).to_string());
        table.push(row);
    }
}

fn sample_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["sample_id", "r", "tau1", "hit_grain"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 1..dim {
        h.push(format!("w{k}"));
    }
    h.push("escaped".into());
    h
}

/// Free path study (or a plain microscopic run when `micro_only`).
fn freepath<const D: usize>(
    cfg: &ExperimentConfig,
    clock: &mut Clock,
    micro_only: bool,
) -> Result<Outcome> {
    let s = setup::<D>(cfg)?;
    let mut results = Vec::new();
    let mut verdicts = BTreeMap::new();
    let limit = if micro_only {
        None
    } else {
        let kernel = PolyKernel::new(s.scene.clone())?;
        Some(clock.time("limit", || limit_cdf(cfg, &s, &kernel)))
    };
    let mut per_r = Table::new(
        "freepath",
        &[
            "r",
            "epsilon",
            "samples",
            "escaped",
            "escape_limit",
            "ks",
            "p_value",
        ],
    );
    if micro_only {
        per_r = Table::new(
            "microsim_summary",
            &["r", "epsilon", "samples", "escaped", "mean_tau1"],
        );
    }
    let mut samples_table = Table {
        name: "microsim".into(),
        header: sample_header(D),
        rows: Vec::new(),
    };
    let mut ks_values = Vec::new();
    let mut empirical = Vec::new();
    for &r in &cfg.r_schedule {
        let (epsilon, _, samples) =
            clock.time(&format!("microsim r={r}"), || micro_samples(cfg, &s, r))?;
        let taus: Vec<f64> = samples.iter().map(|p| p.tau).collect();
        let escaped = samples.iter().filter(|p| p.escaped()).count();
        if cfg.output.samples {
            sample_table(r, &samples, &mut samples_table);
        }
        match &limit {
            None => {
                let finite: Vec<f64> = taus.iter().copied().filter(|t| t.is_finite()).collect();
                let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
                per_r.push(vec![
                    fmt(r),
                    fmt(epsilon),
                    samples.len().to_string(),
                    escaped.to_string(),
                    fmt(mean),
                ]);
                results.push(
                    json!({ "r": r, "epsilon": epsilon, "escaped": escaped, "mean_tau1": mean }),
                );
            }
            Some(Ok(limit)) => {
                let ks = ks_one_sample(&taus, |t| limit.eval(t), limit.at_infinity())?;
                empirical.push(crate::stats::EmpiricalCdf::new(&taus)?);
                ks_values.push(ks.statistic);
                per_r.push(vec![
                    fmt(r),
                    fmt(epsilon),
                    samples.len().to_string(),
                    escaped.to_string(),
                    fmt(1.0 - limit.at_infinity()),
                    fmt(ks.statistic),
                    fmt(ks.p_value),
                ]);
                results.push(json!({
                    "r": r,
                    "epsilon": epsilon,
                    "escaped": escaped,
                    "escape_limit": 1.0 - limit.at_infinity(),
                    "ks": test_json(&ks),
                }));
            }
            Some(Err(e)) => {
                results.push(json!({ "r": r, "escaped": escaped, "limit_error": e.to_string() }));
            }
        }
    }
    match &limit {
        Some(Ok(_)) => {
            verdicts.insert(
                "ks_decreasing".to_string(),
                ks_values.windows(2).all(|w| w[1] < w[0]),
            );
            verdicts.insert(
                "ks_final_below_threshold".to_string(),
                ks_values
                    .last()
                    .is_some_and(|k| *k < cfg.thresholds.ks_final),
            );
        }
        Some(Err(_)) => {
            verdicts.insert("limit_available".to_string(), false);
        }
        None => {}
    }
    let mut tables = vec![per_r];
    if let Some(Ok(limit)) = &limit {
        let mut header = vec!["xi".to_string(), "limit".to_string()];
        header.extend(
            cfg.r_schedule
                .iter()
                .map(|r| format!("empirical_r{}", fmt(*r))),
        );
        let mut cdf = Table {
            name: "freepath_cdf".into(),
            header,
            rows: Vec::new(),
        };
        let (grid, values) = limit.grid();
        let step = (grid.len() / 400).max(1);
        for i in (0..grid.len()).step_by(step) {
            let mut row = vec![fmt(grid[i]), fmt(values[i])];
            row.extend(empirical.iter().map(|e| fmt(e.eval(grid[i]))));
            cdf.push(row);
        }
        tables.push(cdf);
    }
    if cfg.output.samples {
        tables.push(samples_table);
    }
    Ok((json!({ "per_r": results }), verdicts, tables))
}

fn transition<const D: usize>(cfg: &ExperimentConfig, clock: &mut Clock) -> Result<Outcome> {
    let s = setup::<D>(cfg)?;
    let x = match &s.start.position {
        SpatialLaw::Point(x) => *x,
        SpatialLaw::Box { .. } => {
            return Err(Error::Config(
                "transition needs a fixed start position".into(),
            ))
        }
    };
    let kernel = PolyKernel::new(s.scene.clone())?;
    let edges = &cfg.transition.xi_edges;
    let regions = ImpactRegion::partition(D, cfg.transition.regions)?;
    let rule = DirectionRule::new(&s.law, rule_resolution(D, cfg.quadrature.directions))?;
    let exit = s.start.beta.exit_param();
    let masses = clock.time("limit", || {
        cell_masses(&kernel, &x, &rule, exit, edges, &regions)
    })?;
    let nx = edges.len() - 1;
    let nr = regions.len();
    let rest = (1.0 - masses.iter().sum::<f64>()).max(0.0);
    let mut probs = masses.clone();
    probs.push(rest);
    let mut cells = Table::new(
        "transition_cells",
        &["r", "xi_lo", "xi_hi", "region", "observed", "limit"],
    );
    let mut per_r = Table::new("transition", &["r", "samples", "chi2", "dof", "p_value"]);
    let mut results = Vec::new();
    let mut last_p = None;
    for &r in &cfg.r_schedule {
        let (_, _, samples) =
            clock.time(&format!("microsim r={r}"), || micro_samples(cfg, &s, r))?;
        let mut counts = vec![0u64; nx * nr + 1];
        for p in &samples {
            let cell = p.impact.as_ref().and_then(|w| {
                let i = (0..nx).find(|&i| p.tau >= edges[i] && p.tau < edges[i + 1])?;
                let j = regions.iter().position(|reg| reg.contains(w))?;
                Some(i * nr + j)
            });
            counts[cell.unwrap_or(nx * nr)] += 1;
        }
        let test = chi_square_gof(&counts, &probs, cfg.thresholds.min_expected)?;
        let n = samples.len() as f64;
        for i in 0..nx {
            for j in 0..nr {
                let k = i * nr + j;
                cells.push(vec![
                    fmt(r),
                    fmt(edges[i]),
                    fmt(edges[i + 1]),
                    j.to_string(),
                    fmt(counts[k] as f64 / n),
                    fmt(masses[k]),
                ]);
            }
        }
        per_r.push(vec![
            fmt(r),
            samples.len().to_string(),
            fmt(test.statistic),
            fmt(test.size),
            fmt(test.p_value),
        ]);
        results.push(json!({ "r": r, "chi_square": test_json(&test), "rest_observed": counts[nx * nr] as f64 / n, "rest_limit": rest }));
        last_p = Some(test.p_value);
    }
    let mut verdicts = BTreeMap::new();
    verdicts.insert(
        "final_not_rejected".to_string(),
        last_p.is_some_and(|p| p > cfg.thresholds.alpha),
    );
    Ok((
        json!({ "per_r": results, "cell_masses": masses }),
        verdicts,
        vec![per_r, cells],
    ))
}

/// Poisson pmf with mean m for n = 0..len−1 and the tail in the last cell.
fn poisson_probs(m: f64, len: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(len);
    let mut term = (-m).exp();
    let mut acc = 0.0;
    for n in 0..len - 1 {
        p.push(term);
        acc += term;
        term *= m / (n + 1) as f64;
    }
    p.push((1.0 - acc).max(0.0));
    p
}

fn is_full_tiling<const D: usize>(scene: &Scene<D>, nodes: usize) -> bool {
    match scene.periodic() {
        Some(pb) => box_nodes(&pb.lo, &pb.hi, nodes)
            .iter()
            .all(|x| scene.locate(x).is_some()),
        None => false,
    }
}

fn poisson_baseline<const D: usize>(cfg: &ExperimentConfig, clock: &mut Clock) -> Result<Outcome> {
    let s = setup::<D>(cfg)?;
    if s.scene
        .media()
        .iter()
        .any(|m| !matches!(m, Medium::Poisson))
    {
        return Err(Error::Config(
            "poisson-baseline needs a scene of Poisson grains".into(),
        ));
    }
    let kernel = PolyKernel::new(s.scene.clone())?;
    let limit = clock.time("limit", || limit_cdf(cfg, &s, &kernel))?;
    let r = *cfg.r_schedule.last().expect("validated non-empty");
    let (_, scatterers, samples) = clock.time("free paths", || micro_samples(cfg, &s, r))?;
    let taus: Vec<f64> = samples.iter().map(|p| p.tau).collect();
    let ks = ks_one_sample(&taus, |t| limit.eval(t), limit.at_infinity())?;
    let mut verdicts = BTreeMap::new();
    verdicts.insert(
        "ks_below_threshold".to_string(),
        ks.statistic < cfg.thresholds.ks_poisson,
    );

    // Two consecutive collisions per trajectory: (exit parameter of the
    // first, next free path), and collision counts in [0, T].
    let n_traj = cfg.samples.min(MAX_TRAJECTORIES);
    let traj_seed = substream(cfg.seed, TRAJECTORY_SEED_STREAM).next_u64();
    let (lo, hi) = match &s.start.position {
        SpatialLaw::Box { lo, hi } => (*lo, *hi),
        SpatialLaw::Point(x) => (*x, *x),
    };
    let law = s.law.clone();
    let t_count = cfg.poisson.count_time;
    type Draw<const D: usize> = (Option<(f64, f64)>, usize, Vector<D>, Vector<D>);
    let mut draws: Vec<Draw<D>> = Vec::with_capacity(n_traj);
    for (b, ids) in batches(n_traj, cfg.poisson.realizations)
        .into_iter()
        .enumerate()
    {
        let (_, micro) = realization(cfg, &s, r, b)?;
        let batch: Vec<Result<Draw<D>>> = clock.time("trajectories", || {
            use rayon::prelude::*;
            ids.into_par_iter()
                .map(|i| {
                    let mut rng = substream(traj_seed, i as u64);
                    let x = if lo == hi {
                        lo
                    } else {
                        uniform_box(&mut rng, &lo, &hi)
                    };
                    let v = law.sample(&mut rng);
                    let pair = match micro.first_collision(&x, &v) {
                        Some(e1) => {
                            let s1 = exit_param(&e1.v_out, &v)?;
                            let key = if D == 2 { s1.as_slice()[0] } else { s1.norm() };
                            let tau2 = micro
                                .first_collision(&e1.point, &e1.v_out)
                                .map_or(f64::INFINITY, |e| e.tau);
                            Some((key, tau2))
                        }
                        None => None,
                    };
                    let count = micro.trajectory(&x, &v, t_count)?.len();
                    Ok((pair, count, x, v))
                })
                .collect()
        });
        for d in batch {
            draws.push(d?);
        }
    }
    let pairs: Vec<(f64, f64)> = draws.iter().filter_map(|d| d.0).collect();
    let keys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let nexts: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let kedges = quantile_edges(&keys, cfg.poisson.velocity_bins);
    let xedges = quantile_edges(&nexts, cfg.poisson.xi_bins);
    let mut table = vec![vec![0u64; xedges.len() + 2]; kedges.len() + 1];
    for (k, t) in &pairs {
        table[bin_index(&kedges, *k).min(kedges.len())][bin_index(&xedges, *t)] += 1;
    }
    // the next free path depends on the collision point unless the scene
    // is one homogeneous medium, so the verdict applies to full tilings
    let memory = chi_square_independence(&table)?;
    let full_tiling = is_full_tiling(&s.scene, cfg.quadrature.spatial_nodes);
    if full_tiling {
        verdicts.insert(
            "memoryless_not_rejected".to_string(),
            memory.p_value > cfg.thresholds.alpha,
        );
    }

    // Collision counts: against the limit flight process, and against
    // Poisson(σ̄T) on full tilings.
    let micro_counts: Vec<usize> = draws.iter().map(|d| d.1).collect();
    let process = FlightProcess::new(kernel.clone(), cfg.flight.regime)?;
    let flight_counts: Vec<usize> = clock.time("flight counts", || -> Result<Vec<usize>> {
        use rayon::prelude::*;
        draws
            .par_iter()
            .enumerate()
            .map(|(i, d)| {
                let mut rng = substream(traj_seed ^ 0x5eed, i as u64);
                let st = process.start(d.2, d.3, &mut rng)?;
                Ok(process.evolve(&st, t_count, &mut rng)?.collisions as usize)
            })
            .collect()
    })?;
    let width = micro_counts
        .iter()
        .chain(&flight_counts)
        .copied()
        .max()
        .unwrap_or(0)
        + 1;
    let mut hist = vec![vec![0u64; width]; 2];
    for &c in &micro_counts {
        hist[0][c] += 1;
    }
    for &c in &flight_counts {
        hist[1][c] += 1;
    }
    let counts_vs_flight = chi_square_independence(&hist)?;
    verdicts.insert(
        "counts_match_flight".to_string(),
        counts_vs_flight.p_value > cfg.thresholds.alpha,
    );
    let mut counts_json = json!({ "vs_flight": test_json(&counts_vs_flight) });
    if full_tiling {
        let probs = poisson_probs(sigma_bar(D) * t_count, width + 1);
        let mut obs = hist[0].clone();
        obs.push(0);
        let t = chi_square_gof(&obs, &probs, cfg.thresholds.min_expected)?;
        verdicts.insert(
            "counts_poisson".to_string(),
            t.p_value > cfg.thresholds.alpha,
        );
        counts_json["vs_poisson"] = test_json(&t);
    }
    let mut counts = Table::new("poisson_counts", &["n", "micro", "flight"]);
    for (n, (a, b)) in hist[0].iter().zip(&hist[1]).take(width).enumerate() {
        counts.push(vec![n.to_string(), a.to_string(), b.to_string()]);
    }
    let mut cdf = Table::new("poisson_cdf", &["xi", "empirical", "limit"]);
    let emp = crate::stats::EmpiricalCdf::new(&taus)?;
    let (grid, values) = limit.grid();
    let step = (grid.len() / 200).max(1);
    for i in (0..grid.len()).step_by(step) {
        cdf.push(vec![fmt(grid[i]), fmt(emp.eval(grid[i])), fmt(values[i])]);
    }
    let mut tables = vec![cdf, counts];
    if cfg.output.samples {
        let mut t = Table {
            name: "microsim".into(),
            header: sample_header(D),
            rows: Vec::new(),
        };
        sample_table(r, &samples, &mut t);
        tables.push(t);
    }
    let results = json!({
        "r": r,
        "scatterers": scatterers,
        "free_path_ks": test_json(&ks),
        "escaped": emp.escaped(),
        "escape_limit": 1.0 - limit.at_infinity(),
        "memorylessness": test_json(&memory),
        "collision_counts": counts_json,
        "trajectories": n_traj,
    });
    Ok((results, verdicts, tables))
}

fn angle<const D: usize>(v: &Vector<D>) -> f64 {
    if D == 2 {
        v[1].atan2(v[0])
    } else {
        v[2]
    }
}

/// Derived seed of independent ensemble k.
fn ensemble_seed(seed: u64, k: u64) -> u64 {
    substream(seed, ENSEMBLE_STREAM + k).next_u64()
}

struct Marginals {
    xi: Vec<f64>,
    v_plus: Vec<f64>,
    v: Vec<f64>,
    position: Vec<f64>,
}

fn marginals<const D: usize>(
    states: &[ExtendedState<D>],
    lo: &Vector<D>,
    hi: &Vector<D>,
) -> Marginals {
    let wrap = |x: f64| {
        let w = hi[0] - lo[0];
        lo[0] + (x - lo[0]).rem_euclid(w)
    };
    Marginals {
        xi: states.iter().map(|s| s.xi).collect(),
        v_plus: states.iter().map(|s| angle(&s.v_plus)).collect(),
        v: states.iter().map(|s| angle(&s.v)).collect(),
        position: states.iter().map(|s| wrap(s.x[0])).collect(),
    }
}

fn evolved<const D: usize>(
    p: &FlightProcess<D>,
    law: &InitialLaw<D>,
    n: usize,
    seed: u64,
    legs: &[f64],
) -> Result<Vec<ExtendedState<D>>> {
    let mut ens = p.ensemble(law, n, seed)?;
    for &dt in legs {
        p.evolve_ensemble(&mut ens, dt)?;
    }
    Ok(ens.into_iter().map(|e| e.0).collect())
}

fn flight<const D: usize>(
    cfg: &ExperimentConfig,
    report: FlightReport,
    clock: &mut Clock,
) -> Result<Outcome> {
    let start = build_start::<D>(&cfg.start, cfg.scene.periodic.as_ref()).ok();
    let anchor = match (&start, &cfg.scene.anchor) {
        (Some(s), _) => s.anchor(&cfg.scene)?,
        (None, Some(a)) => vector::<D>(a, "scene anchor")?,
        (None, None) => Vector::<D>::zeros(),
    };
    let scene = build_scene::<D>(&cfg.scene, anchor)?;
    let law_dir = build_directions::<D>(&cfg.directions)?;
    let (lo, hi) = match (&cfg.flight.region, &cfg.scene.periodic) {
        (Some(b), _) | (None, Some(b)) => box_law::<D>(b, "flight region")?,
        (None, None) => {
            return Err(Error::Config(
                "flight needs flight.region or a periodic scene".into(),
            ))
        }
    };
    let kernel = PolyKernel::new(scene)?;
    let process = FlightProcess::new(kernel.clone(), cfg.flight.regime)?;
    let law = InitialLaw {
        position: SpatialLaw::Box { lo, hi },
        direction: law_dir.clone(),
    };
    let n = cfg.samples;
    let t = cfg.flight.time;
    let mut verdicts = BTreeMap::new();
    let regime = format!("{:?}", process.regime()).to_lowercase();
    match report {
        FlightReport::Marginals => {
            let states = clock.time("evolve", || evolved(&process, &law, n, cfg.seed, &[t]))?;
            let m = marginals(&states, &lo, &hi);
            let mut table = Table::new(
                "flight_marginals",
                &[
                    "particle",
                    "x0",
                    "v_angle",
                    "xi",
                    "v_plus_angle",
                    "collisions",
                ],
            );
            for (i, s) in states.iter().enumerate() {
                table.push(vec![
                    i.to_string(),
                    fmt(m.position[i]),
                    fmt(m.v[i]),
                    fmt(s.xi),
                    fmt(m.v_plus[i]),
                    s.collisions.to_string(),
                ]);
            }
            let escaped = states.iter().filter(|s| s.escaped()).count();
            let mean = states.iter().map(|s| s.collisions as f64).sum::<f64>() / n as f64;
            let tables = if cfg.output.samples {
                vec![table]
            } else {
                Vec::new()
            };
            Ok((
                json!({ "regime": regime, "time": t, "escaped": escaped, "mean_collisions": mean }),
                verdicts,
                tables,
            ))
        }
        FlightReport::Ncollision => {
            let states = clock.time("evolve", || evolved(&process, &law, n, cfg.seed, &[t]))?;
            let hist = crate::flight::n_collision_histogram(&states);
            let rule = DirectionRule::new(&law_dir, rule_resolution(D, cfg.quadrature.directions))?;
            let n0 = clock.time("quadrature", || {
                no_collision_fraction(&kernel, &lo, &hi, &rule, cfg.quadrature.spatial_nodes, t)
            })?;
            let observed = hist[0] as f64 / n as f64;
            let rel = (observed - n0).abs() / n0;
            verdicts.insert("n0_fraction".to_string(), rel < cfg.thresholds.n0_relative);
            let mut table = Table::new("ncollision", &["n", "count", "fraction"]);
            for (k, c) in hist.iter().enumerate() {
                table.push(vec![
                    k.to_string(),
                    c.to_string(),
                    fmt(*c as f64 / n as f64),
                ]);
            }
            Ok((
                json!({ "regime": regime, "time": t, "histogram": hist, "n0_observed": observed, "n0_quadrature": n0, "n0_relative_error": rel }),
                verdicts,
                vec![table],
            ))
        }
        FlightReport::Stationarity => {
            let names = ["xi", "v_plus", "v", "position"];
            let mut p_stat: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
            let mut p_split: Vec<Vec<f64>> = vec![Vec::new(); 2];
            let mut table = Table::new(
                "stationarity",
                &["repetition", "test", "statistic", "p_value"],
            );
            let split = cfg.flight.split;
            for rep in 0..cfg.flight.repetitions as u64 {
                let a = clock.time("initial", || {
                    evolved(&process, &law, n, ensemble_seed(cfg.seed, 3 * rep), &[])
                })?;
                let b = clock.time("evolve", || {
                    evolved(
                        &process,
                        &law,
                        n,
                        ensemble_seed(cfg.seed, 3 * rep + 1),
                        &[t],
                    )
                })?;
                let c = clock.time("evolve split", || {
                    evolved(
                        &process,
                        &law,
                        n,
                        ensemble_seed(cfg.seed, 3 * rep + 2),
                        &[split, t - split],
                    )
                })?;
                let (ma, mb, mc) = (
                    marginals(&a, &lo, &hi),
                    marginals(&b, &lo, &hi),
                    marginals(&c, &lo, &hi),
                );
                let pairs = [
                    (&ma.xi, &mb.xi),
                    (&ma.v_plus, &mb.v_plus),
                    (&ma.v, &mb.v),
                    (&ma.position, &mb.position),
                ];
                for (k, (x, y)) in pairs.iter().enumerate() {
                    let test = ks_two_sample(x, y)?;
                    table.push(vec![
                        rep.to_string(),
                        format!("stationary_{}", names[k]),
                        fmt(test.statistic),
                        fmt(test.p_value),
                    ]);
                    p_stat[k].push(test.p_value.max(f64::MIN_POSITIVE));
                }
                for (k, (x, y)) in [(&mb.xi, &mc.xi), (&mb.v_plus, &mc.v_plus)]
                    .iter()
                    .enumerate()
                {
                    let test = ks_two_sample(x, y)?;
                    table.push(vec![
                        rep.to_string(),
                        format!("semigroup_{}", names[k]),
                        fmt(test.statistic),
                        fmt(test.p_value),
                    ]);
                    p_split[k].push(test.p_value.max(f64::MIN_POSITIVE));
                }
            }
            let alpha = cfg.thresholds.alpha;
            let mut combined = BTreeMap::new();
            for (k, name) in names.iter().enumerate() {
                let p = fisher_combine(&p_stat[k])?;
                combined.insert(format!("stationary_{name}"), json!({ "fisher_p": p, "rejections": p_stat[k].iter().filter(|x| **x <= alpha).count() }));
                verdicts.insert(format!("stationary_{name}"), p > alpha);
            }
            for (k, name) in names.iter().take(2).enumerate() {
                let p = fisher_combine(&p_split[k])?;
                combined.insert(format!("semigroup_{name}"), json!({ "fisher_p": p, "rejections": p_split[k].iter().filter(|x| **x <= alpha).count() }));
                verdicts.insert(format!("semigroup_{name}"), p > alpha);
            }
            Ok((
                json!({ "regime": regime, "time": t, "split": split, "repetitions": cfg.flight.repetitions, "tests": combined }),
                verdicts,
                vec![table],
            ))
        }
    }
}

fn kernel_tables<const D: usize>(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut table = Table::new(
        "kernels",
        &[
            "medium", "xi", "w", "z", "phi0_wz", "phi_w", "phi0_w", "phi", "d_phi",
        ],
    );
    let n = cfg.tables.points;
    let param = |a: f64| -> Result<BallPoint> {
        let mut c = vec![0.0; D - 1];
        c[0] = a;
        BallPoint::new(&c)
    };
    for model in [KernelModel::crystal(D)?, KernelModel::poisson(D)?] {
        let name = format!("{:?}", model.medium).to_lowercase();
        let top = if model.xi_max().is_finite() {
            model.xi_max()
        } else {
            2.0
        };
        for i in 1..=n {
            let xi = top * i as f64 / n as f64;
            for &w in &cfg.tables.params {
                for &z in &cfg.tables.params {
                    let (wp, zp) = (param(w)?, param(-z)?);
                    table.push(vec![
                        name.clone(),
                        fmt(xi),
                        fmt(w),
                        fmt(-z),
                        fmt(model.transition(xi, &wp, &zp)?),
                        fmt(model.survival_w(xi, &wp)?),
                        fmt(model.density_w(xi, &wp)?),
                        fmt(model.free_path(xi)?),
                        fmt(model.free_path_survival(xi)?),
                    ]);
                }
            }
        }
    }
    let rows = table.rows.len();
    Ok((
        json!({ "rows": rows, "explicit_range": crate::kernels::explicit_range(D) }),
        BTreeMap::new(),
        vec![table],
    ))
}

fn psi_table<const D: usize>(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = setup::<D>(cfg)?;
    let x = match &s.start.position {
        SpatialLaw::Point(x) => *x,
        SpatialLaw::Box { .. } => {
            return Err(Error::Config("psi tables need start.position".into()))
        }
    };
    let v = match &cfg.tables.direction {
        Some(d) => {
            let v = vector::<D>(d, "tables.direction")?;
            v / v.norm()
        }
        None => Err(Error::Config("psi tables need tables.direction".into()))?,
    };
    let kernel = PolyKernel::new(s.scene)?;
    let mut c = vec![0.0; D - 1];
    c[0] = cfg.tables.params.first().copied().unwrap_or(0.0);
    let w = BallPoint::new(&c)?;
    let end = kernel.scene().extent().max(1.0);
    let mut table = Table::new(
        "psi",
        &[
            "xi",
            "psi",
            "psi_w",
            "psi0_z",
            "psi0_wz",
            "no_collision",
            "envelope",
            "gap",
        ],
    );
    for i in 0..cfg.tables.points {
        let xi = end * i as f64 / (cfg.tables.points - 1) as f64;
        table.push(vec![
            fmt(xi),
            fmt(kernel.psi(&x, &v, xi)),
            fmt(kernel.psi_marg_w(&x, &v, xi, &w)?),
            fmt(kernel.psi0_marg(&x, &v, xi, &w)?),
            fmt(kernel.psi0_full(&x, &v, xi, &w, &w)?),
            fmt(kernel.no_collision_before(&x, &v, xi, None)),
            fmt(kernel.psi_tail_bound(&x, &v, xi)),
            fmt(kernel.scene().gap(&x, &v, xi)),
        ]);
    }
    let escape = kernel.escape_mass(&x, &v, 1e4, None);
    Ok((
        json!({ "escape_mass": escape, "tail_rate": kernel.tail_rate(), "tail_constant": kernel.tail_constant() }),
        BTreeMap::new(),
        vec![table],
    ))
}
