//! Numerical laboratory for a transport-diffusion model of an age- and
//! size-structured population.
//!
//! The crate has four computational layers on top of a shared tensor-grid
//! core ([`domain`]):
//!
//! * [`forward`] — operator-splitting time stepper producing synthetic
//!   solutions of the full system (upwind transport in age/size,
//!   Crank–Nicolson diffusion in space, nonlocal birth boundary).
//! * [`carleman`] — the exponentially weighted energy machinery: weight
//!   evaluation, conjugated operator and its algebraic split, and
//!   quadrature sweeps checking the weighted inequality over large
//!   parameters `(s, lambda)`.
//! * [`geometry`] — the level-set geometry used for continuation from a
//!   subboundary: weight base catalog, level values, region predicate and
//!   the smooth cut-off.
//! * [`continuation`] — lateral Cauchy data extraction and a
//!   Carleman-weighted quasi-reversibility reconstruction, plus the
//!   exponential decay table that exhibits the continuation mechanism.
//!
//! The [`cli`] module wires everything to the `carleman-lab` binary.
//! All heavy loops are data-parallel over grid nodes; the `parallel`
//! feature (on by default) backs them with rayon, with a sequential
//! fallback compiled otherwise. Reductions are chunked deterministically
//! so identical configs and seeds give byte-identical reports.

pub mod carleman;
pub mod cli;
pub mod config;
pub mod continuation;
pub mod domain;
pub mod error;
pub mod exec;
pub mod forward;
pub mod geometry;
pub mod logsum;
pub mod report;
pub mod sparse;

pub use error::{Error, Result};
