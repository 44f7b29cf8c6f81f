//! The limiting random flight on the extended phase space (x, v, ξ, v₊).
//!
//! Initial law: (x, v) ~ f0, then (ξ, v₊) with density Ψ(x, v, ξ, b)σ(v, v₊).
//! After a collision with previous velocity v_prev and new velocity v the
//! next pair has density Ψ₀(x, v, ξ, b, −s)σ(v, v₊), s = exit_param(v, v_prev).
//! Since σ(v, v₊)dv₊ = db, both laws are sampled in (ξ, b) with b on the
//! unit ball and v₊ = scatter(v, b).

use crate::ball::BallPoint;
use crate::error::{invalid, Error, Result};
use crate::kernels::MediumKind;
use crate::microsim::DirectionLaw;
use crate::polykernel::PolyKernel;
use crate::rng::{open01, substream, uniform_ball, uniform_box, StreamRng};
use crate::scattering::{exit_param, scatter, Frame};
use crate::Vector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How (ξ, b) is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplingRegime {
    /// Factorized when every kernel is w, z-free, rejection otherwise.
    #[default]
    Auto,
    /// ξ by exact inversion of the survival product, b uniform.
    Factorized,
    /// Exact escape draw, then rejection from C·e^{−γ(ξ − gap)}.
    Rejection,
}

/// State of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState<const D: usize> {
    pub x: Vector<D>,
    pub v: Vector<D>,
    /// Distance to the next collision; infinite once escaped.
    pub xi: f64,
    pub v_plus: Vector<D>,
    pub collisions: u64,
    pub time: f64,
}

impl<const D: usize> ExtendedState<D> {
    pub fn escaped(&self) -> bool {
        self.xi.is_infinite()
    }
}

/// Spatial part of the initial law.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialLaw<const D: usize> {
    Point(Vector<D>),
    /// Uniform on the box [lo, hi).
    Box {
        lo: Vector<D>,
        hi: Vector<D>,
    },
}

/// Product initial law f0(x, v).
#[derive(Debug, Clone, PartialEq)]
pub struct InitialLaw<const D: usize> {
    pub position: SpatialLaw<D>,
    pub direction: DirectionLaw<D>,
}

/// Next flight: ξ = ∞ means escape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flight {
    pub xi: f64,
    pub b: Option<BallPoint>,
}

/// The flight process on a scene.
#[derive(Debug, Clone)]
pub struct FlightProcess<const D: usize> {
    kernel: PolyKernel<D>,
    regime: SamplingRegime,
    gamma: f64,
    envelope: f64,
    horizon: f64,
}

/// Survival factor of a segment of length `eta` and its inverse.
#[derive(Debug, Clone, Copy)]
enum Factor {
    /// e^{−σ̄η}
    Exponential(f64),
    /// 1 − 2η + aη², a = 12/π² (d = 2 crystal)
    Quadratic(f64),
    /// 1 − aη (d = 2 crystal, first branch after a collision)
    Linear(f64),
}

impl Factor {
    fn neg_log(&self, eta: f64) -> f64 {
        match *self {
            Factor::Exponential(s) => s * eta,
            Factor::Quadratic(a) => -(1.0 - 2.0 * eta + a * eta * eta).ln(),
            Factor::Linear(a) => -(1.0 - a * eta).ln(),
        }
    }

    /// η with −ln(factor(η)) = h.
    fn invert(&self, h: f64) -> f64 {
        let one_minus_y = -(-h).exp_m1();
        match *self {
            Factor::Exponential(s) => h / s,
            Factor::Quadratic(a) => one_minus_y / (1.0 + (1.0 - a * one_minus_y).max(0.0).sqrt()),
            Factor::Linear(a) => one_minus_y / a,
        }
    }
}

impl<const D: usize> FlightProcess<D> {
    pub fn new(kernel: PolyKernel<D>, regime: SamplingRegime) -> Result<Self> {
        let regime = match regime {
            SamplingRegime::Auto if kernel.is_parameter_free() => SamplingRegime::Factorized,
            SamplingRegime::Auto => SamplingRegime::Rejection,
            SamplingRegime::Factorized if !kernel.is_parameter_free() => {
                return invalid(
                    "factorized sampling needs w, z-free kernels (d = 2 or Poisson media)",
                );
            }
            r => r,
        };
        let gamma = kernel.tail_rate();
        // Prefix factors are ≤ e^{−γℓ}; the last factor is ≤ e^{−γη} except
        // the first-branch Φ₀(η, w, z) ≤ sup Φ₀ ≤ sup Φ₀·e^{ζ/2}e^{−γη}.
        let envelope = (0..kernel.scene().grains().len())
            .map(|i| {
                let m = kernel.model(i);
                match m.medium {
                    MediumKind::Poisson => 1.0,
                    MediumKind::Crystal => (m.transition_sup() * (0.5 * m.zeta).exp()).max(1.0),
                }
            })
            .fold(1.0, f64::max);
        let horizon = if kernel.scene().periodic().is_some() {
            1e4
        } else {
            f64::INFINITY
        };
        Ok(FlightProcess {
            kernel,
            regime,
            gamma,
            envelope,
            horizon,
        })
    }

    pub fn kernel(&self) -> &PolyKernel<D> {
        &self.kernel
    }

    pub fn regime(&self) -> SamplingRegime {
        self.regime
    }

    /// (K, γ) with target density ≤ K·e^{−γ(ξ − gap)} in (ξ, b).
    pub fn envelope(&self) -> (f64, f64) {
        (self.envelope, self.gamma)
    }

    fn factor(&self, grain: usize, first_branch: bool) -> Factor {
        let m = self.kernel.model(grain);
        match (m.medium, first_branch) {
            (MediumKind::Poisson, _) => Factor::Exponential(m.sigma_bar),
            (MediumKind::Crystal, false) => {
                Factor::Quadratic(12.0 / (std::f64::consts::PI.powi(2)))
            }
            (MediumKind::Crystal, true) => Factor::Linear(12.0 / (std::f64::consts::PI.powi(2))),
        }
    }

    /// Effective exit parameter: a collision point that rounding put outside
    /// every grain gets a zero-length first branch.
    fn effective_exit<'a>(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        exit: Option<&'a BallPoint>,
    ) -> Option<&'a BallPoint> {
        exit.filter(|_| self.kernel.scene().inside_indicator(x, v))
    }

    fn target(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        xi: f64,
        b: &BallPoint,
        exit: Option<&BallPoint>,
    ) -> Result<f64> {
        match exit {
            None => self.kernel.psi_marg_w(x, v, xi, b),
            Some(z) => self.kernel.psi0_full(x, v, xi, b, z),
        }
    }

    /// Draws the next flight from (x, v). `exit` is the z-argument of Ψ₀
    /// after a collision, `None` for the initial law.
    pub fn sample_flight<R: Rng + ?Sized>(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        exit: Option<&BallPoint>,
        rng: &mut R,
    ) -> Result<Flight> {
        let exit = self.effective_exit(x, v, exit);
        match self.regime {
            SamplingRegime::Factorized | SamplingRegime::Auto => {
                self.sample_factorized(x, v, exit, rng)
            }
            SamplingRegime::Rejection => self.sample_rejection(x, v, exit, rng),
        }
    }

    fn sample_factorized<R: Rng + ?Sized>(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        exit: Option<&BallPoint>,
        rng: &mut R,
    ) -> Result<Flight> {
        let h = -open01(rng).ln();
        let mut acc = 0.0;
        for (k, s) in self
            .kernel
            .scene()
            .itinerary_iter(x, v, self.horizon)
            .enumerate()
        {
            let f = self.factor(s.grain, k == 0 && exit.is_some());
            let total = f.neg_log(s.len());
            if acc + total >= h {
                let eta = f.invert(h - acc).min(s.len());
                let b = uniform_ball::<D, _>(rng);
                return Ok(Flight {
                    xi: s.entry + eta,
                    b: Some(b),
                });
            }
            acc += total;
        }
        Ok(Flight {
            xi: f64::INFINITY,
            b: None,
        })
    }

    /// Maps covered length c to the ray parameter ξ.
    fn uncover(&self, x: &Vector<D>, v: &Vector<D>, c: f64) -> Option<f64> {
        let mut covered = 0.0;
        for s in self.kernel.scene().itinerary_iter(x, v, self.horizon) {
            if covered + s.len() > c {
                return Some(s.entry + (c - covered));
            }
            covered += s.len();
        }
        None
    }

    fn covered_total(&self, x: &Vector<D>, v: &Vector<D>) -> f64 {
        if self.horizon.is_finite() {
            return f64::INFINITY;
        }
        self.kernel
            .scene()
            .itinerary_iter(x, v, self.horizon)
            .map(|s| s.len())
            .sum()
    }

    fn sample_rejection<R: Rng + ?Sized>(
        &self,
        x: &Vector<D>,
        v: &Vector<D>,
        exit: Option<&BallPoint>,
        rng: &mut R,
    ) -> Result<Flight> {
        let escape = self.kernel.no_collision_before(x, v, self.horizon, exit);
        if rng.random::<f64>() < escape {
            return Ok(Flight {
                xi: f64::INFINITY,
                b: None,
            });
        }
        let total = self.covered_total(x, v);
        let g = self.gamma;
        let mass = -(-g * total).exp_m1();
        for _ in 0..1_000_000 {
            let c = -(-(rng.random::<f64>() * mass)).ln_1p() / g;
            let Some(xi) = self.uncover(x, v, c) else {
                continue;
            };
            let b = uniform_ball::<D, _>(rng);
            let t = self.target(x, v, xi, &b, exit)?;
            let bound = self.envelope * (-g * c).exp();
            debug_assert!(
                t <= bound * (1.0 + 1e-9),
                "envelope violated: {t} > {bound}"
            );
            if rng.random::<f64>() * bound < t {
                return Ok(Flight { xi, b: Some(b) });
            }
        }
        Err(Error::InvalidInput(format!(
            "rejection sampler made no progress from x = {x:?}, v = {v:?}"
        )))
    }

    /// (x, v) ~ f0, then (ξ, v₊) from the initial law.
    pub fn sample_initial<R: Rng + ?Sized>(
        &self,
        law: &InitialLaw<D>,
        rng: &mut R,
    ) -> Result<ExtendedState<D>> {
        let x = match &law.position {
            SpatialLaw::Point(p) => *p,
            SpatialLaw::Box { lo, hi } => uniform_box(rng, lo, hi),
        };
        let v = law.direction.sample(rng);
        self.start(x, v, rng)
    }

    /// Draws (ξ, v₊) for a given (x, v) from the initial law.
    pub fn start<R: Rng + ?Sized>(
        &self,
        x: Vector<D>,
        v: Vector<D>,
        rng: &mut R,
    ) -> Result<ExtendedState<D>> {
        let f = self.sample_flight(&x, &v, None, rng)?;
        Ok(self.state(x, v, f, 0, 0.0))
    }

    fn state(
        &self,
        x: Vector<D>,
        v: Vector<D>,
        f: Flight,
        collisions: u64,
        time: f64,
    ) -> ExtendedState<D> {
        let v_plus = match &f.b {
            Some(b) => scatter(&Frame::new(&v), b),
            None => v,
        };
        ExtendedState {
            x,
            v,
            xi: f.xi,
            v_plus,
            collisions,
            time,
        }
    }

    /// (ξ, v₊) after a collision at x_col that turned v_prev into v.
    pub fn sample_collision<R: Rng + ?Sized>(
        &self,
        v_prev: &Vector<D>,
        x_col: &Vector<D>,
        v: &Vector<D>,
        rng: &mut R,
    ) -> Result<(f64, Vector<D>)> {
        let s = exit_param(v, v_prev)?;
        let f = self.sample_flight(x_col, v, Some(&s.neg()), rng)?;
        let st = self.state(*x_col, *v, f, 0, 0.0);
        Ok((st.xi, st.v_plus))
    }

    /// Advances by dt, registering every collision on the way.
    pub fn evolve<R: Rng + ?Sized>(
        &self,
        state: &ExtendedState<D>,
        dt: f64,
        rng: &mut R,
    ) -> Result<ExtendedState<D>> {
        if !(dt >= 0.0) {
            return invalid(format!("dt must be nonnegative, got {dt}"));
        }
        let mut s = *state;
        let mut left = dt;
        while left >= s.xi {
            left -= s.xi;
            s.time += s.xi;
            s.x += s.v * s.xi;
            let v_prev = s.v;
            s.v = s.v_plus;
            let (xi, v_plus) = self.sample_collision(&v_prev, &s.x, &s.v, rng)?;
            s.xi = xi;
            s.v_plus = v_plus;
            s.collisions += 1;
        }
        s.x += s.v * left;
        s.time += left;
        if s.xi.is_finite() {
            s.xi -= left;
        }
        Ok(s)
    }

    /// n particles from f0; particle i uses stream i of `seed`. The returned
    /// generators continue those streams.
    pub fn ensemble(
        &self,
        law: &InitialLaw<D>,
        n: usize,
        seed: u64,
    ) -> Result<Vec<(ExtendedState<D>, StreamRng)>> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, i as u64);
                let s = self.sample_initial(law, &mut rng)?;
                Ok((s, rng))
            })
            .collect()
    }

    /// Evolves every particle by dt with its own generator.
    pub fn evolve_ensemble(
        &self,
        particles: &mut [(ExtendedState<D>, StreamRng)],
        dt: f64,
    ) -> Result<()> {
        particles.par_iter_mut().try_for_each(|(s, rng)| {
            *s = self.evolve(s, dt, rng)?;
            Ok(())
        })
    }
}

/// Counts of ν_t over an ensemble.
pub fn n_collision_histogram<const D: usize>(states: &[ExtendedState<D>]) -> Vec<u64> {
    let max = states.iter().map(|s| s.collisions).max().unwrap_or(0) as usize;
    let mut h = vec![0u64; max + 1];
    for s in states {
        h[s.collisions as usize] += 1;
    }
    h
}
