//! Finite-dimensional checks for quantum measurement theory, quantum logic
//! and contextuality.

pub mod acceptance;
pub mod cli;
pub mod epistemic;
pub mod fvlab;
pub mod hardylab;
pub mod hepplab;
pub mod kslab;
pub mod numkernel;
pub mod presheaf;
pub mod qlattice;
pub mod report;
pub mod waylab;
