//! IO, file formats, configuration, and the experiment runner behind the
//! `malinit` command-line tool. The algorithms live in `malinit-core`; this
//! crate adds everything that needs a filesystem or a clock.

pub mod commands;
pub mod config;
pub mod container;
pub mod dataio;
