//! Weighted fair division of indivisible goods under bivalued valuations.

#![allow(clippy::result_large_err)]

pub mod cli;
pub mod error;
pub mod generate;
pub mod gmref;
pub mod init;
pub mod instance;
pub mod io;
pub mod market;
pub mod oracle;
pub mod rational;
pub mod realloc;
pub mod verify;
