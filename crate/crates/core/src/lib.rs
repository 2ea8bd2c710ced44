//! Discrete-event simulator for serving text-to-image diffusion requests with
//! a semantic cache of generated images and a mixture of large and small
//! models.

pub mod allocator;
pub mod cache;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod scheduler;
pub mod workload;

pub use error::{Error, Result};
