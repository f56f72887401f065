//! File formats and the `trustdyn` command-line front end for
//! [`trustdyn_core`].

pub mod cli;
pub mod io;
