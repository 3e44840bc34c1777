//! Curriculum and self-paced learning for tabular maximum-entropy inverse
//! reinforcement learning.

pub mod curriculum;
pub mod env;
pub mod error;
pub mod features;
pub mod harness;
pub mod learner;
pub mod mdp;
pub mod policy;
pub mod record;
pub mod self_paced;
pub mod soft_vi;

pub use error::{Error, Result};
