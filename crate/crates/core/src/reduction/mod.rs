//! Projection-based reduced-order models.

pub mod deim;
pub mod pod;

pub use deim::{build_deim_operator, build_pod_deim_rom, deim_select, DeimOperator};
pub use pod::{assemble_snapshots, compute_pod_basis, galerkin_project, PodBasis, RomKind, RomSystem, SnapshotMatrix};
