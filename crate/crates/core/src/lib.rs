//! Asymptotically hyperbolic mass on the Poincaré ball.
//!
//! The library computes the energy–momentum of a conformally compact metric
//! `h` relative to the hyperbolic metric `g` in two independent ways: by
//! integrating a boundary tractor cocycle density against the KID boundary
//! values, and by the classical Michel flux integral over level sets of the
//! canonical defining function. Supporting modules provide the ball chart,
//! conformal weight bookkeeping, standard tractor calculus, boundary
//! coefficient extraction and spherical quadrature.

pub mod asymptotics;
pub mod chart;
pub mod cli;
pub mod cocycle;
pub mod config;
pub mod error;
pub mod families;
pub mod fd;
pub mod harmonics;
pub mod mass;
pub mod metric;
pub mod quadrature;
pub mod richardson;
pub mod tensors;
pub mod tractor;
pub mod verify;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub use asymptotics::{check_equivalence, extract_mu, extract_mu0, AsymptoticData, EpsilonSchedule};
pub use chart::{adapted_rho, hyperbolic_metric, kid_basis, BallPoint, DefiningFunction, KidSolution};
pub use families::{aspect_perturbation, schwarzschild_ads, AspectProfile, MetricFamily};
pub use mass::{compare_routes, michel_mass, tractor_mass, MassReport};
pub use metric::{MetricField, ScalarField, SymTensorField};
pub use quadrature::{sphere_quadrature, QuadratureRule};
pub use tractor::TractorTriple;
