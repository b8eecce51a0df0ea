//! Command-line tool and HTTP service around `iwin-core`.

pub mod cli;
pub mod service;
pub mod store;
pub mod study;
