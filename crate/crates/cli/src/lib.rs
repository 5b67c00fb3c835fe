//! Command-line front end for `genesis-core`.

mod app;
pub mod error;
pub mod render;
pub mod spec;
pub mod sweep;

pub use app::run;
