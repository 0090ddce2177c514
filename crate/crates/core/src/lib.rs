//! Relational Gaussian quantum states: Kähler structures, center-of-mass and
//! relational partitions, group averaging over translations, capacitor
//! Z-model extraction energetics and binned center-of-mass measurements.

pub mod fock;
pub mod gaussian;
pub mod kahler;
pub mod linalg;
pub mod partition;
pub mod povm;
pub mod quadrature;
pub mod relational;
pub mod scenario;
pub mod zmodel;
