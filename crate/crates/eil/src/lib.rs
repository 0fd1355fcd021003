//! Imitation learning from demonstrations that contain extraneous subsequences.
//!
//! The pipeline: generate noisy demonstrations in toy 2D control environments
//! ([`env`], [`synthgen`]), learn action-conditioned temporal embeddings with a
//! cycle-consistency loss ([`encoder`], [`tcc`]), filter extraneous frames by
//! voting-based alignment or reference matching ([`align`]), then behavior-clone
//! a policy on the filtered data ([`bc`]) and score everything ([`metrics`]).

pub mod align;
pub mod autodiff;
pub mod bc;
pub mod domain;
pub mod encoder;
pub mod env;
pub mod metrics;
pub mod synthgen;
pub mod tcc;

mod error;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
