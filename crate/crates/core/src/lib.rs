//! Stochastic trees and woods, Taylor expansions of mild solutions of
//! semilinear parabolic SPDEs with additive noise, the one-step schemes they
//! generate, and a Monte Carlo harness for strong convergence orders.

pub mod evaluator;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod sampler;
pub mod schemes;
pub mod trees;
