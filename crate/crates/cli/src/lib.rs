//! Library side of the `xsplit` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
