//! HTTP service and command-line front end for `cnn-lens-core`.

pub mod cli;
pub mod server;
