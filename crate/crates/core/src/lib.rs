//! Toolkit for building semantic parsing evaluation data: systematic
//! train/dev/test splits, word-overlap leakage diagnostics, CCG-based
//! recombination of challenge sentences with plausibility filtering, and
//! triple-matching evaluation for Sequence Box Notation meaning representations.

pub mod ccg;
pub mod corpus;
pub mod metrics;
pub mod plausibility;
pub mod recombine;
pub mod sbn;
pub mod split;
pub mod synth;
