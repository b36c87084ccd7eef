//! Extended dynamic mode decomposition and Koopman eigenfunctions.

mod dictionary;
mod edmd;
mod eigenfunction;

pub use dictionary::{Basis, Dictionary, DictionaryKind};
pub use edmd::{
    build_snapshots, eigendecompose, estimate_koopman_matrix, fit, lift, lift_matrix, select_oscillatory_mode,
    KoopmanSpectrum, ModeBand, SnapshotPair, DEFAULT_SVD_TOLERANCE,
};
pub use eigenfunction::{Eigenfunction, EigenfunctionRecord, Normalization};
