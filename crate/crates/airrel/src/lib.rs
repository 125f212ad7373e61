//! Dataset IO, validation, synthetic generators and the `airrel` command
//! line on top of `airrel-core`.

pub mod cli;
pub mod datasets;
pub mod generate;
pub mod output;
