//! Standard-library companion to `ips-core`: file formats, parallel drivers
//! and the `ips` command line.

pub mod cli;
pub mod experiments;
pub mod formats;
pub mod parallel;
