//! Covering numbers for the range of a subordinator.
//!
//! The greedy first-passage construction `T_{k+1} = inf{s ≥ T_k : X_s − X_{T_k} > δ}`
//! gives the minimal number `N(t, δ)` of δ-intervals covering `{X_s : s ≤ t}`.
//! This crate simulates subordinators, counts their coverings, evaluates the
//! potential function `U(δ) = E[T_1(δ)]` by several independent routes and runs
//! Monte-Carlo experiments checking that `U(δ)·N(t, δ) → t`.

pub mod cli;
pub mod config;
pub mod covering;
pub mod error;
pub mod model;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod stats;
pub mod verify;

pub use covering::{count_covering_path, count_covering_renewal, splitting_defect, CountMethod, CoveringCount};
pub use error::{Error, Result};
pub use model::{eval_phi, eval_tail, validate, EligibilityReport, Family, JumpLaw, LevyTail, SubordinatorSpec};
pub use potential::{
    potential_asymptotic, potential_mc, potential_q_two_ways, potential_quadrature, potential_series, solve_delta_grid,
    DeltaGrid, PotentialEstimate, PotentialMethod,
};
pub use rng::RngStream;
pub use simulate::{
    sample_first_passage, sample_increment, simulate_events, simulate_skeleton, Engine, FirstPassageSample, SamplePath,
};
