//! Deterministic grip-stabilization sandbox.
//!
//! The crate simulates a multi-finger hand holding an object on a desk-scale,
//! quasi-static 2-D physics model. Each fingertip carries a synthetic tactile
//! sensor (low-frequency pressure, a high-rate vibration channel, and an
//! electrode array). A windowed feature extractor and a multinomial logistic
//! regression classifier predict, a few frames ahead, whether the contact is
//! slipping, resting, or absent. Each finger runs its own controller that
//! integrates those predictions into a leaky slip statistic and commands a
//! strictly non-negative approach velocity that grows exponentially with the
//! statistic. Fingers never exchange state; the grip stabilizes through the
//! object itself.
//!
//! Pipeline, end to end:
//!
//! 1. [`datagen`] — scripted data-collection trials over a rigidly held
//!    object produce labeled sensor streams (JSONL).
//! 2. [`features`] / [`classifier`] — sliding windows become fixed-layout
//!    feature vectors; a softmax classifier is trained full-batch.
//! 3. [`harness`] — closed-loop stabilization runs, disturbance and partner
//!    -finger scenarios, and the generalization sweep.
//!
//! Everything is seeded: identical configuration and seed reproduce output
//! files byte for byte.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod controller;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod features;
pub mod harness;
pub mod physics;
pub mod report;
pub mod rng;
pub mod sensor;
pub mod types;
pub mod vec2;

pub use config::RunConfig;
pub use error::Error;
pub use types::{Label, SensorFrame, SensorVariant};
