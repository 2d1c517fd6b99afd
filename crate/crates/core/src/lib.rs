//! Protein binder design toolkit: structure parsing, multiscale graph
//! featurization, a small reverse-mode tensor engine, an autoregressive
//! graph-transformer design model, contrastive decoding, sequence scoring,
//! MSA interolog pairing and interface benchmarks.

pub mod benchmark;
pub mod container;
pub mod decoder;
pub mod featurize;
pub mod geometry;
pub mod model;
pub mod msa;
pub mod residue;
pub mod scoring;
pub mod structure;
pub mod synth;
pub mod tensor;

pub use geometry::{RigidMotion, Vec3};
pub use structure::{parse_structure, Atom, Chain, ChainRole, Format, Residue, Structure, StructureError};
