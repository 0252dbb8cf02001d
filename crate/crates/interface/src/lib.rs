//! Command line and HTTP front ends over `unibias-core`.

pub mod cli;
pub mod error;
pub mod http;
pub mod payload;
pub mod session;
