//! Command line front end and local HTTP API for the token economy toolkit.

pub mod api;
pub mod commands;
