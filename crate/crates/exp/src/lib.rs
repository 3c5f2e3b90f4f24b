//! Experiment driver for the `dsrr` library: configuration files, parameter
//! sweeps, theorem-verification suites, distributed-simulation comparisons
//! and JL diagnostics, all writing CSV and SVG artifacts.

pub mod cli;
pub mod config;
pub mod distributed;
pub mod jl;
pub mod suites;
pub mod svg;
pub mod sweep;
