//! File formats, fixture generators, benchmark suites and the command-line
//! front end built on `gnode_reach_core`.

pub mod bench;
pub mod cli;
pub mod fixtures;
pub mod model_io;
pub mod plot;
pub mod sets_io;
