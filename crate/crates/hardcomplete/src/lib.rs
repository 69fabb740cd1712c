//! File formats, JSON reports and the command-line pipelines built on
//! `hardcomplete-core`.

pub mod cli;
pub mod formats;
pub mod report;
