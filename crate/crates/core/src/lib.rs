//! Compiles 360° video projects into branching narrative graphs.

pub mod branch_points;
pub mod branches;
pub mod diversity;
pub mod geometry;
pub mod graph;
pub mod ingest;
pub mod narration;
pub mod pipeline;
pub mod simulate;
