//! Inexact decentralized dual gradient tracking.
//!
//! A simulator for constraint-coupled problems
//! `min Σ_i f_i(x_i)  s.t.  Σ_i A_i x_i = b` over a network of agents that
//! exchange messages through a doubly stochastic mixing matrix. Each agent
//! solves its Lagrangian subproblem only to a controllable accuracy and
//! tracks the global dual gradient with a local estimate.

pub mod algorithm;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod inner;
pub mod linalg;
pub mod network;
pub mod problem;
pub mod rng;

pub use error::{Error, Result};
