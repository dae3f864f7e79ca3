pub mod analysis;
pub mod calibration;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod materials;
pub mod mode_solver;
pub mod propagation;
pub mod units;
