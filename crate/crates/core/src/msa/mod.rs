//! Multiple sequence alignments: A3M/Stockholm I/O, interolog pairing by
//! column-attention similarity or by identity to the query, block-diagonal
//! concatenation, and diversity statistics.

mod attention;
mod io;
mod pairing;
mod stats;

pub use attention::{query_similarities, similarity_from_attention, Aggregation, AttentionStack, ATTENTION_KIND};
pub use io::{parse_a3m, parse_stockholm, species_from_header, write_paired_a3m};
pub use pairing::{block_diagonalize, pair_by_attention, pair_by_rank, pair_phylogeny, PairedMsa, PairedRow, Provenance};
pub use stats::{henikoff_weights, identity, meff, msa_stats, MsaStats, MEFF_IDENTITY};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GAP: u8 = b'-';

#[derive(Debug, Error)]
pub enum MsaError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("row {row} has {got} aligned columns, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("alignment has no rows")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Container(#[from] crate::container::ContainerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsaRow {
    pub header: String,
    /// Aligned residues over the match columns, gaps as `-`.
    pub seq: Vec<u8>,
    pub species: Option<String>,
    pub similarity: Option<f64>,
}

impl MsaRow {
    pub fn new(header: &str, seq: &str) -> Self {
        Self { header: header.to_string(), seq: seq.as_bytes().to_vec(), species: species_from_header(header), similarity: None }
    }

    pub fn with_species(mut self, species: &str) -> Self {
        self.species = Some(species.to_string());
        self
    }

    pub fn non_gap(&self) -> usize {
        self.seq.iter().filter(|&&c| c != GAP).count()
    }
}

/// Query plus hits, all of the same aligned length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsaBlock {
    pub query: MsaRow,
    pub hits: Vec<MsaRow>,
}

impl MsaBlock {
    pub fn new(query: MsaRow, hits: Vec<MsaRow>) -> Result<Self, MsaError> {
        let b = Self { query, hits };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), MsaError> {
        let c = self.width();
        for (i, h) in self.hits.iter().enumerate() {
            if h.seq.len() != c {
                return Err(MsaError::Ragged { row: i + 1, expected: c, got: h.seq.len() });
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.query.seq.len()
    }

    /// Rows including the query.
    pub fn depth(&self) -> usize {
        self.hits.len() + 1
    }

    /// Query first, then hits.
    pub fn rows(&self) -> impl Iterator<Item = &MsaRow> {
        std::iter::once(&self.query).chain(&self.hits)
    }

    pub fn sequences(&self) -> Vec<&[u8]> {
        self.rows().map(|r| r.seq.as_slice()).collect()
    }
}
