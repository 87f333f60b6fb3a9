//! Temporal keyword co-occurrence network (KCN) analysis and dynamic
//! link-prediction features.
//!
//! The crate covers the data side of the pipeline:
//!
//! - [`corpus`]: bibliographic record ingestion, keyword normalization,
//!   rare-keyword filtering and yearly evolution statistics
//! - [`kcn`]: yearly co-occurrence snapshots and bipartite incidences
//! - [`centrality`]: recursive bipartite centralities and degree centrality,
//!   z-score normalized per year
//! - [`genealogy`]: grandparent/parent/child/guest communities derived from
//!   the previous year's most central keywords
//! - [`features`]: per-keyword and per-pair temporal features, labeled
//!   instance construction with seeded negative sampling
//! - [`eval`]: forecasting and classification metrics
//! - [`synth`]: seeded synthetic corpus generator for desk-scale runs
//!
//! The recurrent-network stack that consumes the instance series lives in the
//! companion `kcn-neural` crate.

pub mod centrality;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod genealogy;
pub mod kcn;
pub mod synth;

pub use error::CoreError;

/// Calendar year.
pub type Year = i32;

/// Dense keyword identifier assigned by the corpus interner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeywordId(pub u32);

/// Dense author identifier assigned by the corpus interner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AuthorId(pub u32);

impl KeywordId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl AuthorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Formats a real with 12 significant digits, the precision used by every
/// CSV and report emitted by the pipeline (keeps output hashes meaningful).
pub fn fmt_real(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        // Integral values print without an exponent so small counts stay
        // readable in dumps.
        format!("{}", x)
    } else {
        format!("{:.11e}", x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_real_is_stable() {
        assert_eq!(fmt_real(0.0), "0");
        assert_eq!(fmt_real(2.0), "2");
        assert_eq!(fmt_real(0.5), "5.00000000000e-1");
        assert_eq!(fmt_real(1.0 / 3.0), "3.33333333333e-1");
    }
}
