pub mod basis;
pub mod error;
pub mod hermite;
pub mod multiindex;
pub mod brownian;
pub mod chaos;
pub mod solver;
pub mod problems;
pub mod oracle;
pub mod config;
pub mod validate;
pub mod cli;
