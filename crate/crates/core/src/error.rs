//! Error type shared by the pipeline stages in this crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: malformed record: {msg}")]
    MalformedRecord { line: usize, msg: String },

    #[error("line {line}: record {id} has year {year} outside configured range {lo}..={hi}")]
    YearOutOfRange {
        line: usize,
        id: String,
        year: i32,
        lo: i32,
        hi: i32,
    },

    #[error("normalization rules: {0}")]
    BadRules(String),

    #[error("year {0} is not covered by the corpus")]
    UnknownYear(i32),

    #[error("corpus identity mismatch: the temporal KCN was built from a different corpus")]
    CorpusMismatch,

    #[error("bipartite incidence for year {year} is empty")]
    EmptyIncidence { year: i32 },

    #[error("bipartite incidence for year {year}: keyword {keyword:?} has no incident rows")]
    EmptyColumn { year: i32, keyword: String },

    #[error("non-finite value in recursive centrality at iteration {iteration}")]
    NonFiniteCentrality { iteration: usize },

    #[error("negative sampling shortfall: requested {requested} negatives but only {available} eligible pairs exist")]
    NegativeShortfall { requested: usize, available: usize },

    #[error("no positive instances: no training-disconnected pair gains an edge in the test year")]
    NoPositives,

    #[error("normalized rmse undefined: actual values are constant but predictions differ")]
    ConstantActual,

    #[error("metric requires both classes but labels contain a single class")]
    SingleClass,

    #[error("metric input is empty or mismeasured: {0}")]
    BadMetricInput(String),
}
