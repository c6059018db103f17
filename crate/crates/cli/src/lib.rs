//! Command-line tools and HTTP/JSON service for the epidemic policy toolkit.
//!
//! [`api`] holds the request and response types and the functions both front
//! ends call; [`cli`] parses arguments and writes files; [`server`] exposes
//! the same functions over HTTP.

pub mod api;
pub mod cli;
pub mod config;
pub mod server;
