//! Joint minimum-discrepancy domain adaptation for small feedforward
//! classifiers.
//!
//! A single network is trained on labeled source data and unlabeled target
//! data. At its representation tap (penultimate layer) and logit tap the
//! source and target activations are pulled together with two discrepancy
//! measures, CORAL (covariance alignment) and multi-kernel MMD², while the
//! entropy of the target predictions is pushed down:
//!
//! ```text
//! total = λ_ce·CE + λ_cr·CORAL(rep) + λ_cl·CORAL(logits)
//!       + λ_mr·MMD²(rep) + λ_ml·MMD²(logits) + λ_H·H(target logits)
//! ```
//!
//! All gradients are analytic and checked against finite differences in the
//! test suite.
//!
//! ```
//! use mindisc::{data::gen_two_moons, evaluation::accuracy, trainer::{train, TrainConfig}};
//!
//! let source = gen_two_moons(200, 0.1, 0.0, 1).unwrap();
//! let target = gen_two_moons(200, 0.1, 30.0, 2).unwrap();
//! let config = TrainConfig { layers: vec![2, 16, 16, 2], epochs: 2, ..TrainConfig::default() };
//! let (net, history) = train(&config, &source, target.unlabeled()).unwrap();
//! assert_eq!(history.len(), 2 * (200 / 32));
//! let acc = accuracy(&net, &target).unwrap();
//! assert!((0.0..=100.0).contains(&acc));
//! ```

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod losses;
pub mod network;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
pub use numerics::{Matrix, Rng};
