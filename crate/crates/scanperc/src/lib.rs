//! Image files, JSON reports, Monte Carlo harnesses and the command-line
//! front end for [`scanperc_core`].

pub mod cli;
pub mod io;
pub mod mc;
pub mod report;
pub mod scene;

pub use scanperc_core as core;
