//! Configuration, experiment dispatch and self-checks behind the `gafhole` binary.

pub mod config;
pub mod run;
pub mod verify;
