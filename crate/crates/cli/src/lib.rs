//! Experiment runner for the `orthohmc` samplers.

pub mod config;
pub mod container;
pub mod error;
pub mod experiments;
pub mod movielens;
pub mod plot;
pub mod summary;
