//! Environment server and operator CLI for streetsim.

pub mod cli;
pub mod config;
pub mod protocol;
pub mod session;
pub mod tasks;
pub mod transport;
