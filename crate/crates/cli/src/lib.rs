//! Command-line tools and the session service for interactive 360-degree
//! images.

pub mod commands;
pub mod protocol;
pub mod server;
