pub mod dataset_io;
pub mod error;
pub mod geometry;
pub mod maps;
pub mod registration;
pub mod matchers;
pub mod metrics;
pub mod oracle;
pub mod calib_eval;
pub mod cli;
