//! Critical points of regularized deep linear networks.

pub mod bounds;
pub mod harness;
pub mod netmodel;
pub mod patterns;
pub mod polycore;
pub mod rng;
pub mod tracker;
