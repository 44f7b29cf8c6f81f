//! Polycrystal Lorentz gas toolkit.
//!
//! * [`geometry`]: convex grains, scenes, itineraries and the gap function.
//! * [`lattice`]: affine unimodular lattices and thin-tube enumeration.
//! * [`kernels`]: single-medium transition kernels (crystal d = 2, 3 and Poisson).
//! * [`polykernel`]: the polycrystal densities built from itineraries.
//! * [`scattering`]: hard-sphere frames, impact/exit parameters, cross section.
//! * [`microsim`]: exact ray tracing against radius-r scatterers.
//! * [`flight`]: the limiting random flight process on the extended phase space.
//! * [`harness`]: experiment configuration, statistics and report emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ball;
pub mod error;
pub mod flight;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod lattice;
pub mod limits;
pub mod microsim;
pub mod polykernel;
pub mod quadrature;
pub mod rng;
pub mod scattering;
pub mod stats;

use nalgebra::{SMatrix, SVector};

/// Column vector in R^D.
pub type Vector<const D: usize> = SVector<f64, D>;
/// D×D matrix.
pub type Matrix<const D: usize> = SMatrix<f64, D, D>;

pub use ball::BallPoint;
pub use error::{Error, Result};
pub use flight::{ExtendedState, FlightProcess, InitialLaw, SamplingRegime, SpatialLaw};
pub use geometry::{ConvexGrain, Medium, PeriodicBox, Scene, Segment};
pub use kernels::{KernelModel, MediumKind};
pub use lattice::{AffineLattice, ScaledGrainLattice};
pub use microsim::{Beta, CollisionEvent, DirectionLaw, MicroConfig, MicroScene};
pub use polykernel::PolyKernel;
pub use scattering::Frame;
pub use stats::EmpiricalCdf;
