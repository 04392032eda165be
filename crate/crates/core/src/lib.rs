//! Numerical realization of distance-set dimension bounds for polyhedral and
//! smooth norms.
//!
//! The crate evaluates polyhedral and weighted `l^p` norms together with
//! their differential and cone structure, constructs digit-block fractals
//! with exact covering-number oracles, computes (pinned) distance sets, and
//! certifies the dimension inequalities relating them at finite scale:
//!
//! - [`norms`] — norm evaluation (exact on rational input for polyhedral
//!   norms), gradients, the duality-mapping check, cones, transversality
//!   volumes, and the empirical gradient modulus;
//! - [`digitsets`] — block schedules of prescribed limsup density and the
//!   base-`q` digit fractals they generate, with `q^(c#A)` covering oracles;
//! - [`covering`] — grid covering counts for arbitrary point clouds and
//!   log-log slope estimation over declared scale sequences;
//! - [`distance`] — (pinned) distance sets under any supported norm, exact
//!   digit-envelope certification for rational polyhedral norms, and the
//!   structural distance-set counts behind the sharpness bracket;
//! - [`projections`] — coordinate projections, the max-projection
//!   inequality check, the cone projection identity, and greedy fiber
//!   covers quantifying weak transversality.
//!
//! All randomness is counter-based and seeded ([`detrand`]), so every
//! pipeline is reproducible bit-for-bit.

pub mod covering;
pub mod detrand;
pub mod digitsets;
pub mod distance;
pub mod error;
pub mod exact;
pub mod norms;
pub mod projections;

pub use error::{Error, Result};
