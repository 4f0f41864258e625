//! HTTP service and command-line front end over `vera_core`.

pub mod api;
pub mod cli;
pub mod error;
