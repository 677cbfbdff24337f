//! Command-line front end, file format and HTTP service for `ari-core`.

pub mod api;
pub mod commands;
pub mod persist;
pub mod serve;
