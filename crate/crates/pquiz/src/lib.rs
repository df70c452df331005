//! File formats, command line and practice service around `pquiz-core`.

pub mod catalog;
pub mod cli;
pub mod enumerate;
pub mod quizdoc;
pub mod service;
pub mod session;
pub mod taskfile;
