//! Yearly keyword co-occurrence snapshots and bipartite incidence structures.
//!
//! Snapshots are undirected and unweighted: two keywords are connected in a
//! year iff they co-appear in at least one article of that year, and repeated
//! co-appearances are not counted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::corpus::Corpus;
use crate::error::CoreError;
use crate::{KeywordId, Year};

/// One year's co-occurrence graph.
#[derive(Debug, Clone)]
pub struct YearlySnapshot {
    pub year: Year,
    nodes: BTreeSet<KeywordId>,
    /// Unordered pairs stored once with `a < b`.
    edges: BTreeSet<(KeywordId, KeywordId)>,
    adjacency: BTreeMap<KeywordId, BTreeSet<KeywordId>>,
}

impl YearlySnapshot {
    pub fn new(year: Year) -> Self {
        YearlySnapshot {
            year,
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
            adjacency: BTreeMap::new(),
        }
    }

    pub fn add_node(&mut self, k: KeywordId) {
        self.nodes.insert(k);
    }

    /// Inserts an undirected edge; self-loops are ignored.
    pub fn add_edge(&mut self, a: KeywordId, b: KeywordId) {
        if a == b {
            return;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.nodes.insert(lo);
        self.nodes.insert(hi);
        if self.edges.insert((lo, hi)) {
            self.adjacency.entry(lo).or_default().insert(hi);
            self.adjacency.entry(hi).or_default().insert(lo);
        }
    }

    pub fn contains_node(&self, k: KeywordId) -> bool {
        self.nodes.contains(&k)
    }

    pub fn has_edge(&self, a: KeywordId, b: KeywordId) -> bool {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.edges.contains(&(lo, hi))
    }

    pub fn nodes(&self) -> impl Iterator<Item = KeywordId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn edges(&self) -> &BTreeSet<(KeywordId, KeywordId)> {
        &self.edges
    }

    pub fn neighbors(&self, k: KeywordId) -> impl Iterator<Item = KeywordId> + '_ {
        self.adjacency.get(&k).into_iter().flatten().copied()
    }

    pub fn degree(&self, k: KeywordId) -> usize {
        self.adjacency.get(&k).map_or(0, |n| n.len())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// The full yearly sequence of snapshots for a corpus.
#[derive(Debug, Clone)]
pub struct TemporalKcn {
    snapshots: Vec<YearlySnapshot>,
    first_year: Year,
    corpus_fingerprint: u64,
}

impl TemporalKcn {
    pub fn snapshots(&self) -> &[YearlySnapshot] {
        &self.snapshots
    }

    pub fn snapshot(&self, year: Year) -> Option<&YearlySnapshot> {
        let idx = year.checked_sub(self.first_year)?;
        if idx < 0 {
            return None;
        }
        self.snapshots.get(idx as usize)
    }

    pub fn year_range(&self) -> (Year, Year) {
        (
            self.first_year,
            self.first_year + self.snapshots.len() as Year - 1,
        )
    }

    pub fn corpus_fingerprint(&self) -> u64 {
        self.corpus_fingerprint
    }
}

/// Builds one snapshot per year of the corpus range. Keywords from
/// single-keyword articles stay in the node set with degree zero.
pub fn build_temporal_kcn(corpus: &Corpus) -> TemporalKcn {
    let (first, last) = corpus.year_range;
    let mut snapshots: Vec<YearlySnapshot> =
        (first..=last).map(YearlySnapshot::new).collect();
    for rec in &corpus.records {
        let snap = &mut snapshots[(rec.year - first) as usize];
        for &k in &rec.keywords {
            snap.add_node(k);
        }
        for (i, &a) in rec.keywords.iter().enumerate() {
            for &b in &rec.keywords[i + 1..] {
                snap.add_edge(a, b);
            }
        }
    }
    TemporalKcn {
        snapshots,
        first_year: first,
        corpus_fingerprint: corpus.fingerprint,
    }
}

/// Which entity occupies the rows of a bipartite incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BipartiteMode {
    KeywordAuthor,
    KeywordArticle,
}

/// Binary incidence between keywords (columns) and authors or articles
/// (rows) for one year, stored sparsely in both directions because the
/// recursive centrality multiplies both ways.
#[derive(Debug, Clone)]
pub struct BipartiteIncidence {
    pub year: Year,
    pub mode: BipartiteMode,
    /// Keyword behind each column, ascending.
    col_keywords: Vec<KeywordId>,
    /// Per row: sorted column indices with a 1 entry.
    rows: Vec<Vec<u32>>,
    /// Per column: sorted row indices with a 1 entry.
    cols: Vec<Vec<u32>>,
}

impl BipartiteIncidence {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.col_keywords.len()
    }

    pub fn col_keywords(&self) -> &[KeywordId] {
        &self.col_keywords
    }

    pub fn row_entries(&self, row: usize) -> &[u32] {
        &self.rows[row]
    }

    pub fn col_entries(&self, col: usize) -> &[u32] {
        &self.cols[col]
    }

    /// Builds an incidence directly from row -> column-index lists; used by
    /// tests that need arbitrary matrices. Rows and columns must be
    /// non-empty.
    pub fn from_rows(
        year: Year,
        mode: BipartiteMode,
        col_keywords: Vec<KeywordId>,
        rows: Vec<Vec<u32>>,
    ) -> Result<Self, CoreError> {
        let n_cols = col_keywords.len();
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n_cols];
        for (r, row) in rows.iter().enumerate() {
            for &c in row {
                cols[c as usize].push(r as u32);
            }
        }
        let incidence = BipartiteIncidence {
            year,
            mode,
            col_keywords,
            rows,
            cols,
        };
        incidence.validate()?;
        Ok(incidence)
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.rows.is_empty() || self.col_keywords.is_empty() {
            return Err(CoreError::EmptyIncidence { year: self.year });
        }
        if self.rows.iter().any(|r| r.is_empty()) {
            return Err(CoreError::EmptyIncidence { year: self.year });
        }
        for (c, rows) in self.cols.iter().enumerate() {
            if rows.is_empty() {
                return Err(CoreError::EmptyColumn {
                    year: self.year,
                    keyword: format!("{:?}", self.col_keywords[c]),
                });
            }
        }
        Ok(())
    }
}

/// Builds the keyword-author or keyword-article incidence for one year.
/// Rows without keywords are omitted; an empty column (a keyword used only
/// in author-less records, author mode) is a hard error because downstream
/// divisions require positive column sums.
pub fn build_bipartite(
    corpus: &Corpus,
    year: Year,
    mode: BipartiteMode,
) -> Result<BipartiteIncidence, CoreError> {
    if !corpus.contains_year(year) {
        return Err(CoreError::UnknownYear(year));
    }
    // Columns are the year's keywords in ascending id order.
    let mut keyword_set: BTreeSet<KeywordId> = BTreeSet::new();
    for rec in corpus.records.iter().filter(|r| r.year == year) {
        keyword_set.extend(rec.keywords.iter().copied());
    }
    let col_keywords: Vec<KeywordId> = keyword_set.into_iter().collect();
    let col_of: BTreeMap<KeywordId, u32> = col_keywords
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, i as u32))
        .collect();

    let mut row_sets: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    let mut article_row = 0u32;
    for rec in corpus.records.iter().filter(|r| r.year == year) {
        match mode {
            BipartiteMode::KeywordAuthor => {
                for &a in &rec.authors {
                    let set = row_sets.entry(a.0).or_default();
                    set.extend(rec.keywords.iter().map(|k| col_of[k]));
                }
            }
            BipartiteMode::KeywordArticle => {
                let set = row_sets.entry(article_row).or_default();
                set.extend(rec.keywords.iter().map(|k| col_of[k]));
                article_row += 1;
            }
        }
    }

    let rows: Vec<Vec<u32>> = row_sets
        .into_values()
        .map(|set| set.into_iter().collect())
        .collect();
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); col_keywords.len()];
    for (r, row) in rows.iter().enumerate() {
        for &c in row {
            cols[c as usize].push(r as u32);
        }
    }
    let incidence = BipartiteIncidence {
        year,
        mode,
        col_keywords,
        rows,
        cols,
    };
    incidence.validate()?;
    Ok(incidence)
}

/// Degree of every snapshot node; isolated nodes map to zero.
pub fn degree_vector(snapshot: &YearlySnapshot) -> BTreeMap<KeywordId, usize> {
    snapshot.nodes().map(|k| (k, snapshot.degree(k))).collect()
}

/// Edge-list dump across all years: `year,keyword_a,keyword_b` with the pair
/// sorted lexicographically by canonical string.
pub fn edges_csv(kcn: &TemporalKcn, corpus: &Corpus) -> String {
    let mut out = String::from("year,keyword_a,keyword_b\n");
    for snap in kcn.snapshots() {
        let mut rows: Vec<(String, String)> = snap
            .edges()
            .iter()
            .map(|&(a, b)| {
                let (sa, sb) = (corpus.keyword_name(a), corpus.keyword_name(b));
                if sa <= sb {
                    (sa.to_string(), sb.to_string())
                } else {
                    (sb.to_string(), sa.to_string())
                }
            })
            .collect();
        rows.sort();
        for (a, b) in rows {
            let _ = writeln!(out, "{},{},{}", snap.year, a, b);
        }
    }
    out
}
