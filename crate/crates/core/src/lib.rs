//! PAC learning of intersections of `k` halfspaces with a hard or soft margin.
//!
//! The weak learner draws a few negatives and many positives, forms the convex
//! set of origin-centred halfspaces (in a lifted space) that classify them
//! correctly, and returns a uniformly random member of that set found by
//! hit-and-run. Two strong learners sit on top:
//!
//! - [`booster::cover_learner`] carves off high-purity negative regions and
//!   conditions the distribution on what is left, yielding a proper
//!   intersection-of-halfspaces hypothesis;
//! - [`booster::weighted_boost`] runs confidence-rated boosting by resampling
//!   with abstaining "negative on a region" voters.
//!
//! [`distributions`] provides seeded synthetic sources (sphere with hard
//! margin, Boolean cube with low integer weights, Gaussian "pancakes" with a
//! soft margin). [`harness`] holds the CLI plumbing and the verification suite.

pub mod booster;
pub mod distributions;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod learner;
pub mod linalg;
pub mod record;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use geometry::{Classifier, Halfspace, Label, LiftedHalfspace, LiftedPoint, TargetIntersection};
