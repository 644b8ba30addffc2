//! Frame-bound estimates for generalized translation-invariant systems on
//! R^d and Z, with brute-force spectral oracles for cross-checking.

pub mod lattice;
pub mod linalg;
pub mod rational;
pub mod spectra;
pub mod gti;
pub mod estimators;
pub mod oracle;

pub use lattice::{
    difference_points, dual_lattice, enumerate_annihilator_union, AnnihilatorPoint, Lattice, LatticeError,
    LatticeR, LatticeZ, Membership,
};
pub use linalg::{Mat, Point};
pub use rational::{parse_rational, QMat, Q};
pub use spectra::{apply, builtin, custom, Builtin, GeneratorSpec, Region, RegionNorm, SupportHint, Transform, TransformChain, C64};
