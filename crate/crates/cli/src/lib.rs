//! File formats, configuration and the `headpose` command-line tool around
//! [`headpose_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod face_model_io;
pub mod landmarks;
pub mod manifest;
pub mod model_io;
pub mod report;
