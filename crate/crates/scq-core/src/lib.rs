//! Self-correcting Q-learning and friends.
//!
//! This crate implements three estimators of the maximum expected value of a
//! set of random variables (single, double, self-correcting), the tabular
//! learning algorithms built on them (Q-learning, Double Q-learning,
//! Self-correcting Q-learning), three classic benchmark environments, a
//! value-iteration oracle, a deterministic multi-run experiment harness, and
//! a small deep Q-network variant trained on one-hot state encodings.
//!
//! Everything that consumes randomness takes an explicitly seeded source, and
//! the experiment harness derives disjoint ChaCha streams per (run, agent),
//! so results are reproducible bit-for-bit regardless of thread count.

pub mod agents;
mod argmax;
pub mod envs;
pub mod estimators;
pub mod experiments;
pub mod mdp;
pub mod presets;
pub mod scdqn;
pub mod seeding;

pub use mdp::{QTable, TabularMdp, Transition};
