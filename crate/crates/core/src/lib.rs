//! Bayesian clustering of categorical data with mixtures of Hamming
//! distributions and a random number of components.

pub mod baseline;
pub mod cli;
pub mod data;
pub mod error;
pub mod gibbs;
pub mod hamming;
pub mod hig;
pub mod mixture;
pub mod numerics;
pub mod simharness;
pub mod summary;

pub use data::{hamming_distance, load_dataset, Alphabet, CategoricalDataset, LoadOptions};
pub use error::{Error, Result};
