//! Registry, HTTP API and command line around `fineval_core`.

pub mod api;
pub mod cli;
pub mod error;
pub mod registry;
pub mod requests;
