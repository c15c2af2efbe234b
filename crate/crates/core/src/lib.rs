//! Bayesian generative active deep learning: MC-dropout acquisition with
//! VAE-ACGAN augmentation.

pub mod acquisition;
pub mod active;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod dropout;
pub mod error;
pub mod generative;
pub mod gradcheck;
pub mod harness;
pub mod metrics;
pub mod nets;
pub mod optim;
pub mod parallel;
pub mod plot;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
