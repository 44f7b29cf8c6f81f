//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.
//! Criteria 7 to 10 run the experiment configs under `configs/` and take a
//! few minutes in release mode.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use polyxport::harness::{emit, run, ExperimentConfig, Report};
use polyxport::kernels::{area_integral, explicit_range, transition_2d, KernelModel, ZETA3};
use polyxport::quadrature::{integrate, integrate_ball, Tolerance};
use polyxport::rng::{substream, uniform_ball, uniform_box, uniform_sphere};
use polyxport::scattering::{cross_section, scatter};
use polyxport::stats::chi_square_gof;
use polyxport::{AffineLattice, BallPoint, ConvexGrain, Frame, Medium, PolyKernel, Scene, Vector};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bp(c: &[f64]) -> BallPoint {
    BallPoint::new(c).unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run_config(name: &str) -> Result<Report, String> {
    let cfg = ExperimentConfig::load(&config(name)).map_err(|e| format!("{name}: {e}"))?;
    run(&cfg).map_err(|e| format!("{name}: {e}"))
}

fn failed_verdicts(report: &Report) -> Vec<String> {
    report.summary["verdicts"]
        .as_object()
        .map(|m| {
            m.iter()
                .filter(|(_, v)| v.as_bool() != Some(true))
                .map(|(k, _)| k.clone())
                .collect()
        })
        .unwrap_or_default()
}

fn criterion_1() -> Outcome {
    let mut rng = substream(1, 0);
    let c = 6.0 / (PI * PI);
    let k2 = KernelModel::crystal(2).unwrap();
    let k3 = KernelModel::crystal(3).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let xi = rng.random_range(1e-9..=0.5);
        let (w, z) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        worst = worst.max((transition_2d(xi, w, z).unwrap() - c).abs());
        worst = worst.max((k2.transition(xi, &bp(&[w]), &bp(&[z])).unwrap() - c).abs());
    }
    let mut exact = true;
    let mut antiderivative: f64 = 0.0;
    for i in 0..=1000 {
        let xi = 0.5 * i as f64 / 1000.0;
        exact &= k2.free_path(xi).unwrap() == 2.0 - 24.0 / (PI * PI) * xi;
        exact &= k2.free_path_survival(xi).unwrap() == 1.0 - 2.0 * xi + 12.0 / (PI * PI) * xi * xi;
        let xi = 0.25 * i as f64 / 1000.0;
        let cubic = 1.0 - PI * xi + PI * PI / (2.0 * ZETA3) * xi * xi
            - (3.0 * PI * PI + 16.0) / (6.0 * PI * ZETA3) * xi.powi(3);
        exact &= (k3.free_path_survival(xi).unwrap() - cubic).abs() <= 1e-15;
        // D_Φ = 1 − ∫₀^ξ Φ
        if i % 50 == 0 {
            for k in [&k2, &k3] {
                let x = k.xi_max() * i as f64 / 1000.0;
                let mass = integrate(
                    |t| k.free_path(t).unwrap(),
                    0.0,
                    x,
                    Tolerance::absolute(1e-14),
                )
                .unwrap()
                .value;
                antiderivative =
                    antiderivative.max((1.0 - mass - k.free_path_survival(x).unwrap()).abs());
            }
        }
    }
    check(
        worst <= 1e-12 && exact && antiderivative < 1e-12,
        format!("max |phi0_2d - 6/pi^2| = {worst:.1e}, closed forms exact = {exact}, |D - (1 - int Phi)| = {antiderivative:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let g0 = area_integral(0.0).unwrap();
    let g1 = area_integral(1.0).unwrap();
    let e0 = (g0 - PI * (4.0 * PI + 3.0 * 3f64.sqrt()) / 16.0).abs();
    let e1 = (g1 - (5.0 * PI * PI / 16.0 + 1.0)).abs();
    let values: Vec<f64> = (0..1000)
        .map(|i| area_integral(i as f64 / 999.0).unwrap())
        .collect();
    let increasing = values.windows(2).all(|p| p[1] > p[0]);
    check(
        e0 < 1e-8 && e1 < 1e-8 && increasing,
        format!("|G(0) err| = {e0:.1e}, |G(1) err| = {e1:.1e}, increasing = {increasing}"),
    )
}

fn criterion_3() -> Outcome {
    let k = KernelModel::crystal(3).unwrap();
    let mut rng = substream(3, 0);
    let tol = Tolerance {
        abs: 1e-11,
        rel: 1e-11,
        max_intervals: 4000,
    };
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let xi = rng.random_range(h..0.25 - h);
        let w = uniform_ball::<3, _>(&mut rng);
        let d_xi =
            (k.survival_w(xi + h, &w).unwrap() - k.survival_w(xi - h, &w).unwrap()) / (2.0 * h);
        let mass = integrate_ball(2, |z| k.transition(xi, &w, &bp(z)).unwrap(), tol).unwrap();
        worst = worst.max((d_xi + mass).abs());
    }
    check(
        worst < 1e-5,
        format!("max |d/dxi Phi(xi,w) + int Phi0 dz| = {worst:.1e} over 100 draws"),
    )
}

/// A row of 1 to 4 disjoint boxes of random media, each within the explicit
/// kernel range.
fn random_scene<const D: usize, R: Rng>(rng: &mut R) -> Scene<D> {
    let side_max = explicit_range(D) / (D as f64).sqrt();
    let mut grains = Vec::new();
    let mut media = Vec::new();
    let mut cursor = 0.0;
    for i in 0..rng.random_range(1..=4) {
        let lo = Vector::<D>::from_fn(|j, _| {
            if j == 0 {
                cursor
            } else {
                rng.random_range(-0.1..0.1)
            }
        });
        let side = Vector::<D>::from_fn(|_, _| rng.random_range(0.3 * side_max..side_max));
        cursor += side[0]
            + if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.01..0.2)
            };
        grains.push(ConvexGrain::cuboid(i, &lo, &(lo + side)).unwrap());
        media.push(if rng.random_bool(0.7) {
            Medium::Crystal(AffineLattice::integer(Vector::<D>::zeros()))
        } else {
            Medium::Poisson
        });
    }
    Scene::new(grains, media, None, Vector::<D>::zeros()).unwrap()
}

fn point_in_grain<const D: usize, R: Rng>(scene: &Scene<D>, rng: &mut R) -> Vector<D> {
    let g = &scene.grains()[rng.random_range(0..scene.grains().len())];
    let (lo, hi) = g.bounding_box();
    uniform_box(rng, &lo, &hi)
}

/// Largest ratio of a Ψ-family value to the tail envelope.
fn envelope_ratio<const D: usize>(seed: u64) -> f64 {
    let mut rng = substream(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let pk = PolyKernel::new(random_scene::<D, _>(&mut rng)).unwrap();
        let x = point_in_grain(pk.scene(), &mut rng);
        let v: Vector<D> = uniform_sphere(&mut rng);
        let xi = rng.random_range(0.0..1.5);
        let (w, z) = (
            uniform_ball::<D, _>(&mut rng),
            uniform_ball::<D, _>(&mut rng),
        );
        let bound = pk.psi_tail_bound(&x, &v, xi);
        for value in [
            pk.psi(&x, &v, xi),
            pk.psi_marg_w(&x, &v, xi, &w).unwrap(),
            pk.psi0_marg(&x, &v, xi, &z).unwrap(),
            pk.psi0_full(&x, &v, xi, &w, &z).unwrap(),
        ] {
            worst = worst.max(value / bound);
        }
    }
    worst
}

fn criterion_4() -> Outcome {
    let mut rng = substream(4, 0);
    let mut bracket = true;
    for dim in [2usize, 3] {
        let k = KernelModel::crystal(dim).unwrap();
        let lower_slope = 2f64.powi(dim as i32 - 1) * k.sigma_bar;
        for _ in 0..10_000 {
            let xi = rng.random_range(0.0..=k.xi_max());
            let (w, z) = if dim == 2 {
                (
                    uniform_ball::<2, _>(&mut rng),
                    uniform_ball::<2, _>(&mut rng),
                )
            } else {
                (
                    uniform_ball::<3, _>(&mut rng),
                    uniform_ball::<3, _>(&mut rng),
                )
            };
            let v = k.transition(xi, &w, &z).unwrap();
            bracket &= v <= 1.0 / k.zeta + 1e-15 && v >= (1.0 - lower_slope * xi) / k.zeta - 1e-15;
        }
    }
    let mut tails = true;
    for dim in [2usize, 3] {
        for k in [
            KernelModel::crystal(dim).unwrap(),
            KernelModel::poisson(dim).unwrap(),
        ] {
            let end = if k.xi_max().is_finite() {
                k.xi_max()
            } else {
                20.0
            };
            for i in 0..=10_000 {
                let xi = end * i as f64 / 10_000.0;
                tails &= k.free_path_survival(xi).unwrap() <= k.tail_bound(xi) + 1e-15;
            }
        }
    }
    let ratio = envelope_ratio::<2>(41).max(envelope_ratio::<3>(42));
    check(
        bracket && tails && ratio <= 1.0 + 1e-12,
        format!("Phi0 bracket = {bracket}, D_Phi tail bound = {tails}, max Psi / envelope = {ratio:.3} on 1000 scenes"),
    )
}

/// Largest swap, O(d−1) and time-reversal errors, and the number of
/// non-zero time-reversal instances.
fn symmetry_errors<const D: usize>(seed: u64) -> (f64, f64, f64, usize) {
    let mut rng = substream(seed, 0);
    let k = KernelModel::crystal(D).unwrap();
    let (mut swap, mut invariance, mut reversal) = (0f64, 0f64, 0f64);
    let mut nonzero = 0;
    for _ in 0..1000 {
        let xi = rng.random_range(0.0..=k.xi_max());
        let (w, z) = (
            uniform_ball::<D, _>(&mut rng),
            uniform_ball::<D, _>(&mut rng),
        );
        let base = k.transition(xi, &w, &z).unwrap();
        swap = swap.max((base - k.transition(xi, &z, &w).unwrap()).abs());
        let (w2, z2) = if D == 2 {
            (w.neg(), z.neg())
        } else {
            let (s, c) = rng.random_range(0.0..2.0 * PI).sin_cos();
            // a rotation, or a rotation composed with a reflection
            let m = if rng.random_bool(0.5) {
                [[c, s], [-s, c]]
            } else {
                [[c, s], [s, -c]]
            };
            (w.rotate(&m), z.rotate(&m))
        };
        invariance = invariance.max((base - k.transition(xi, &w2, &z2).unwrap()).abs());

        let pk = PolyKernel::new(random_scene::<D, _>(&mut rng)).unwrap();
        let x = point_in_grain(pk.scene(), &mut rng);
        let v: Vector<D> = uniform_sphere(&mut rng);
        let xi = rng.random_range(0.0..2.0 * explicit_range(D));
        let fwd = pk.psi0_full(&x, &v, xi, &w, &z).unwrap();
        let back = pk.psi0_full(&(x + v * xi), &-v, xi, &z, &w).unwrap();
        reversal = reversal.max((fwd - back).abs());
        nonzero += (fwd > 0.0) as usize;
        invariance = invariance.max((fwd - pk.psi0_full(&x, &v, xi, &w2, &z2).unwrap()).abs());
    }
    (swap, invariance, reversal, nonzero)
}

fn criterion_5() -> Outcome {
    let (s2, i2, r2, n2) = symmetry_errors::<2>(51);
    let (s3, i3, r3, n3) = symmetry_errors::<3>(52);
    let (s, i, r) = (s2.max(s3), i2.max(i3), r2.max(r3));
    check(
        s < 1e-10 && i < 1e-10 && r < 1e-10 && n2 >= 50 && n3 >= 50,
        format!(
            "swap {s:.1e}, O(d-1) {i:.1e}, time reversal {r:.1e} ({n2} + {n3} non-zero instances)"
        ),
    )
}

fn pushforward_p<const D: usize>(seed: u64) -> f64 {
    let mut rng = substream(seed, 0);
    let bins = 32;
    let mut observed = vec![0u64; bins];
    for _ in 0..100_000 {
        let v: Vector<D> = uniform_sphere(&mut rng);
        let b = uniform_ball::<D, _>(&mut rng);
        let vp = scatter(&Frame::new(&v), &b);
        let c = v.dot(&vp).clamp(-1.0, 1.0);
        // d = 2: deflection angle on [0, 2π); d = 3: cos of the polar angle
        let u = if D == 2 {
            let sin = v[0] * vp[1] - v[1] * vp[0];
            let theta = sin.atan2(c).rem_euclid(2.0 * PI);
            (1.0 - (theta / 2.0).cos()) / 2.0
        } else {
            (1.0 - c) / 2.0
        };
        observed[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    chi_square_gof(&observed, &vec![1.0 / bins as f64; bins], 5.0)
        .unwrap()
        .p_value
}

fn criterion_6() -> Outcome {
    let tol = Tolerance {
        abs: 1e-12,
        rel: 1e-12,
        max_intervals: 2000,
    };
    let e1 = polyxport::kernels::sigma_bar(2);
    let v2 = Vector::<2>::new(1.0, 0.0);
    let total2 = integrate(
        |t| cross_section(&v2, &Vector::<2>::new(t.cos(), t.sin())),
        0.0,
        2.0 * PI,
        tol,
    )
    .unwrap()
    .value;
    let v3 = Vector::<3>::new(0.0, 0.0, 1.0);
    let total3 = 2.0
        * PI
        * integrate(
            |t| cross_section(&v3, &Vector::<3>::new(t.sin(), 0.0, t.cos())) * t.sin(),
            0.0,
            PI,
            tol,
        )
        .unwrap()
        .value;
    let (d2, d3) = ((total2 - e1).abs(), (total3 - PI).abs());
    let (p2, p3) = (pushforward_p::<2>(61), pushforward_p::<3>(62));
    check(
        d2 < 1e-6 && d3 < 1e-6 && p2 > 0.01 && p3 > 0.01,
        format!("|int sigma - sigma_bar| = {d2:.1e} (d=2), {d3:.1e} (d=3); pushforward p = {p2:.3}, {p3:.3}"),
    )
}

fn criterion_7() -> Outcome {
    let report = run_config("freepath_two_squares.toml")?;
    let ks: Vec<String> = report.summary["results"]["per_r"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|r| {
                    format!(
                        "{}: {:.4}",
                        r["r"],
                        r["ks"]["statistic"].as_f64().unwrap_or(f64::NAN)
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    let failed = failed_verdicts(&report);
    check(
        failed.is_empty(),
        format!("KS by r [{}], failed verdicts {failed:?}", ks.join(", ")),
    )
}

fn criterion_8() -> Outcome {
    let report = run_config("transition_two_squares.toml")?;
    let last = report.summary["results"]["per_r"]
        .as_array()
        .and_then(|a| a.last().cloned())
        .unwrap_or_default();
    check(
        report.passed(),
        format!(
            "r = {}: chi2 = {:.2}, p = {:.4}",
            last["r"],
            last["chi_square"]["statistic"].as_f64().unwrap_or(f64::NAN),
            last["chi_square"]["p_value"].as_f64().unwrap_or(f64::NAN)
        ),
    )
}

fn criterion_9() -> Outcome {
    let tiling = run_config("poisson_tiling.toml")?;
    let gap = run_config("poisson_gap.toml")?;
    let t = &tiling.summary["results"];
    let g = &gap.summary["results"];
    let mut failed = failed_verdicts(&tiling);
    failed.extend(
        failed_verdicts(&gap)
            .into_iter()
            .map(|f| format!("gap:{f}")),
    );
    check(
        failed.is_empty(),
        format!(
            "tiling KS = {:.4}, memoryless p = {:.3}; gap KS = {:.4}; failed {failed:?}",
            t["free_path_ks"]["statistic"].as_f64().unwrap_or(f64::NAN),
            t["memorylessness"]["p_value"].as_f64().unwrap_or(f64::NAN),
            g["free_path_ks"]["statistic"].as_f64().unwrap_or(f64::NAN),
        ),
    )
}

fn criterion_10() -> Outcome {
    let report = run_config("stationarity_checkerboard.toml")?;
    let tests = &report.summary["results"]["tests"];
    let detail: Vec<String> = tests
        .as_object()
        .map(|m| {
            m.iter()
                .map(|(k, v)| format!("{k} {:.3}", v["fisher_p"].as_f64().unwrap_or(f64::NAN)))
                .collect()
        })
        .unwrap_or_default();
    check(
        report.passed(),
        format!("combined p: {}", detail.join(", ")),
    )
}

fn emitted_bytes(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<(String, Vec<u8>)>, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    let report = pool.install(|| run(cfg)).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for path in emit(&report, dir.path()).map_err(|e| e.to_string())? {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name != "timings.json" {
            files.push((name, fs::read(&path).map_err(|e| e.to_string())?));
        }
    }
    Ok(files)
}

fn criterion_11() -> Outcome {
    let mut same = true;
    let mut names = Vec::new();
    for name in [
        "transition_two_squares.toml",
        "stationarity_checkerboard.toml",
    ] {
        let mut cfg = ExperimentConfig::load(&config(name)).map_err(|e| e.to_string())?;
        cfg.samples = 20_000;
        cfg.flight.repetitions = 2;
        let a = emitted_bytes(&cfg, 1)?;
        let b = emitted_bytes(&cfg, 1)?;
        let c = emitted_bytes(&cfg, 3)?;
        same &= a == b && a == c;
        names.extend(a.into_iter().map(|f| f.0));
    }
    check(
        same,
        format!(
            "byte-identical reruns (1, 1 and 3 threads) of {}",
            names.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("kernel unit values", criterion_1),
        ("G endpoints and monotonicity", criterion_2),
        ("d=3 consistency chain", criterion_3),
        ("bounds and tails", criterion_4),
        ("symmetry suite", criterion_5),
        ("cross section", criterion_6),
        ("free path convergence", criterion_7),
        ("joint transition convergence", criterion_8),
        ("Poisson baseline", criterion_9),
        ("stationarity and semigroup", criterion_10),
        ("reproducibility", criterion_11),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|s| s.parse().ok());
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS {name} ({secs:.1} s): {d}", i + 1),
            Err(d) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1} s): {d}", i + 1)
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
