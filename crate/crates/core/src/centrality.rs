//! Per-year keyword centralities: two recursive bipartite variants and
//! degree centrality, each z-score normalized.
//!
//! The recursive variant iterates a pair of vectors over a binary incidence
//! M (rows = authors or articles, columns = keywords):
//!
//! ```text
//! psi_k(0) = column sums of M          psi_a(0) = row sums of M
//! psi_k(n) = (M^T . psi_a(n-1)) / psi_k(0)     elementwise division
//! psi_a(n) = (M   . psi_k(n-1)) / psi_a(0)
//! ```
//!
//! Both updates at step `n` read the step `n-1` vectors. Divisions are by
//! strictly positive initial sums (guaranteed by the incidence invariants).

use std::fmt::Write as _;

use crate::corpus::Corpus;
use crate::error::CoreError;
use crate::kcn::{degree_vector, build_bipartite, BipartiteIncidence, BipartiteMode, TemporalKcn};
use crate::{fmt_real, KeywordId, Year};

/// Centrality variant: recursive keyword-author, recursive keyword-article,
/// or plain degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Au,
    At,
    D,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Au, Variant::At, Variant::D];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Au => "au",
            Variant::At => "at",
            Variant::D => "d",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "au" => Some(Variant::Au),
            "at" => Some(Variant::At),
            "d" => Some(Variant::D),
            _ => None,
        }
    }
}

/// Per-year, per-variant table of raw and z-scored centrality values,
/// sorted by keyword id.
#[derive(Debug, Clone)]
pub struct CentralityTable {
    pub year: Year,
    pub variant: Variant,
    pub iterations_used: usize,
    entries: Vec<CentralityEntry>,
}

#[derive(Debug, Clone)]
pub struct CentralityEntry {
    pub keyword: KeywordId,
    pub raw: f64,
    pub zscore: f64,
}

impl CentralityTable {
    pub fn entries(&self) -> &[CentralityEntry] {
        &self.entries
    }

    pub fn zscore(&self, k: KeywordId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&k, |e| e.keyword)
            .ok()
            .map(|i| self.entries[i].zscore)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Runs the recursive iteration and returns the `n_iters`-th iterate of
/// both vectors (`psi_k` aligned with `incidence.col_keywords()`, `psi_a`
/// with the rows). `n_iters = 0` returns the column/row sums themselves.
pub fn recursive_centrality(
    incidence: &BipartiteIncidence,
    n_iters: usize,
) -> Result<(Vec<f64>, Vec<f64>), CoreError> {
    let n_rows = incidence.num_rows();
    let n_cols = incidence.num_cols();
    if n_rows == 0 || n_cols == 0 {
        return Err(CoreError::EmptyIncidence {
            year: incidence.year,
        });
    }
    let psi_k0: Vec<f64> = (0..n_cols)
        .map(|c| incidence.col_entries(c).len() as f64)
        .collect();
    let psi_a0: Vec<f64> = (0..n_rows)
        .map(|r| incidence.row_entries(r).len() as f64)
        .collect();

    let mut psi_k = psi_k0.clone();
    let mut psi_a = psi_a0.clone();
    for iteration in 1..=n_iters {
        let next_k: Vec<f64> = (0..n_cols)
            .map(|c| {
                let mut sum = 0.0;
                for &r in incidence.col_entries(c) {
                    sum += psi_a[r as usize];
                }
                sum / psi_k0[c]
            })
            .collect();
        let next_a: Vec<f64> = (0..n_rows)
            .map(|r| {
                let mut sum = 0.0;
                for &c in incidence.row_entries(r) {
                    sum += psi_k[c as usize];
                }
                sum / psi_a0[r]
            })
            .collect();
        if next_k.iter().chain(next_a.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteCentrality { iteration });
        }
        psi_k = next_k;
        psi_a = next_a;
    }
    Ok((psi_k, psi_a))
}

/// Z-scores with the population standard deviation; a constant vector maps
/// to all zeros so degenerate early years cannot abort the pipeline.
pub fn z_scores(raw: &[f64]) -> Vec<f64> {
    if raw.is_empty() {
        return Vec::new();
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|v| (v - mean) / std).collect()
}

/// Computes the centrality table for one (year, variant) pair. Keywords
/// absent that year are absent from the table.
pub fn centrality_table(
    kcn: &TemporalKcn,
    corpus: &Corpus,
    year: Year,
    variant: Variant,
    n_iters: usize,
) -> Result<CentralityTable, CoreError> {
    let (keywords, raw): (Vec<KeywordId>, Vec<f64>) = match variant {
        Variant::D => {
            let snap = kcn.snapshot(year).ok_or(CoreError::UnknownYear(year))?;
            degree_vector(snap)
                .into_iter()
                .map(|(k, d)| (k, d as f64))
                .unzip()
        }
        Variant::Au | Variant::At => {
            let mode = if variant == Variant::Au {
                BipartiteMode::KeywordAuthor
            } else {
                BipartiteMode::KeywordArticle
            };
            let incidence = build_bipartite(corpus, year, mode)?;
            let (psi_k, _) = recursive_centrality(&incidence, n_iters)?;
            (incidence.col_keywords().to_vec(), psi_k)
        }
    };
    let z = z_scores(&raw);
    let entries = keywords
        .into_iter()
        .zip(raw)
        .zip(z)
        .map(|((keyword, raw), zscore)| CentralityEntry {
            keyword,
            raw,
            zscore,
        })
        .collect();
    Ok(CentralityTable {
        year,
        variant,
        iterations_used: match variant {
            Variant::D => 0,
            _ => n_iters,
        },
        entries,
    })
}

/// Rank-swap count between consecutive iterates of `psi_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankSwapRow {
    pub n: usize,
    /// Number of keyword pairs whose relative order differs between the
    /// rankings at iterations `n-1` and `n` (ties broken by keyword index).
    pub swaps: usize,
}

fn ranking(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn discordant_pairs(prev: &[usize], next: &[usize]) -> usize {
    // Position of each element in the next ranking.
    let mut pos = vec![0usize; next.len()];
    for (p, &e) in next.iter().enumerate() {
        pos[e] = p;
    }
    let seq: Vec<usize> = prev.iter().map(|&e| pos[e]).collect();
    let mut swaps = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                swaps += 1;
            }
        }
    }
    swaps
}

/// Tracks how the `psi_k` ranking settles: for each `n` in `1..=max_n`,
/// counts the pairs whose relative order changed from the previous iterate.
/// A stable tail of zeros supports choosing a fixed iteration count.
pub fn convergence_report(
    incidence: &BipartiteIncidence,
    max_n: usize,
) -> Result<Vec<RankSwapRow>, CoreError> {
    let (psi_k0, _) = recursive_centrality(incidence, 0)?;
    let mut prev_ranking = ranking(&psi_k0);
    let mut rows = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let (psi_k, _) = recursive_centrality(incidence, n)?;
        let next_ranking = ranking(&psi_k);
        rows.push(RankSwapRow {
            n,
            swaps: discordant_pairs(&prev_ranking, &next_ranking),
        });
        prev_ranking = next_ranking;
    }
    Ok(rows)
}

/// CSV dump across tables: `year,variant,keyword,raw,zscore`, keywords in
/// ascending canonical-string order within each table.
pub fn centrality_csv(tables: &[CentralityTable], corpus: &Corpus) -> String {
    let mut out = String::from("year,variant,keyword,raw,zscore\n");
    for table in tables {
        let mut rows: Vec<(&str, f64, f64)> = table
            .entries()
            .iter()
            .map(|e| (corpus.keyword_name(e.keyword), e.raw, e.zscore))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        for (kw, raw, z) in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                table.year,
                table.variant.as_str(),
                kw,
                fmt_real(raw),
                fmt_real(z)
            );
        }
    }
    out
}
