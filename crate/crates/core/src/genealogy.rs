//! Genealogical communities: each year's keywords are labeled by their graph
//! distance from the previous year's top-N central keywords.
//!
//! Grandparents are the previous year's top-N keywords (those present this
//! year); parents are their direct neighbors; children are the parents'
//! neighbors that touch no grandparent; everything else is a guest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::centrality::{CentralityTable, Variant};
use crate::corpus::Corpus;
use crate::error::CoreError;
use crate::kcn::{TemporalKcn, YearlySnapshot};
use crate::{fmt_real, KeywordId, Year};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CommunityLabel {
    Grandparent,
    Parent,
    Child,
    Guest,
}

impl CommunityLabel {
    pub const ALL: [CommunityLabel; 4] = [
        CommunityLabel::Grandparent,
        CommunityLabel::Parent,
        CommunityLabel::Child,
        CommunityLabel::Guest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommunityLabel::Grandparent => "gp",
            CommunityLabel::Parent => "p",
            CommunityLabel::Child => "c",
            CommunityLabel::Guest => "g",
        }
    }
}

/// Numeric community scores. The defaults form a geometric ladder whose
/// grandparent/parent gap (4x) is wider than the remaining steps (2x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommunityScores {
    pub gp: f64,
    pub p: f64,
    pub c: f64,
    pub g: f64,
}

impl Default for CommunityScores {
    fn default() -> Self {
        CommunityScores {
            gp: 1.0,
            p: 0.25,
            c: 0.125,
            g: 0.0625,
        }
    }
}

impl CommunityScores {
    pub fn get(&self, label: CommunityLabel) -> f64 {
        match label {
            CommunityLabel::Grandparent => self.gp,
            CommunityLabel::Parent => self.p,
            CommunityLabel::Child => self.c,
            CommunityLabel::Guest => self.g,
        }
    }

    pub fn is_strictly_ordered(&self) -> bool {
        self.gp > self.p && self.p > self.c && self.c > self.g && self.g > 0.0
    }
}

/// Labels and scores for one (year, variant) pair.
#[derive(Debug, Clone)]
pub struct CommunityAssignment {
    pub year: Year,
    pub variant: Variant,
    pub scores: CommunityScores,
    /// Top-N keywords from year-1, including those absent from this year's
    /// snapshot (absent ones receive no label).
    pub grandparent_set: Vec<KeywordId>,
    labels: BTreeMap<KeywordId, CommunityLabel>,
}

impl CommunityAssignment {
    pub fn label_of(&self, k: KeywordId) -> Option<CommunityLabel> {
        self.labels.get(&k).copied()
    }

    pub fn score_of(&self, k: KeywordId) -> Option<f64> {
        self.label_of(k).map(|l| self.scores.get(l))
    }

    pub fn labels(&self) -> &BTreeMap<KeywordId, CommunityLabel> {
        &self.labels
    }

    pub fn count(&self, label: CommunityLabel) -> usize {
        self.labels.values().filter(|&&l| l == label).count()
    }
}

/// Top-n keywords by z-scored centrality, descending; ties break toward the
/// smaller keyword id so the selection is deterministic.
pub fn top_n_central(table: &CentralityTable, n: usize) -> Vec<KeywordId> {
    let mut entries: Vec<(KeywordId, f64)> = table
        .entries()
        .iter()
        .map(|e| (e.keyword, e.zscore))
        .collect();
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    entries.into_iter().take(n).map(|(k, _)| k).collect()
}

/// Assigns the four labels on year t's snapshot given the grandparent list
/// drawn from year t-1.
pub fn assign_communities(
    snapshot: &YearlySnapshot,
    variant: Variant,
    grandparents: &[KeywordId],
    scores: CommunityScores,
) -> CommunityAssignment {
    let gp_present: BTreeSet<KeywordId> = grandparents
        .iter()
        .copied()
        .filter(|&k| snapshot.contains_node(k))
        .collect();

    let mut labels: BTreeMap<KeywordId, CommunityLabel> = BTreeMap::new();
    for &k in &gp_present {
        labels.insert(k, CommunityLabel::Grandparent);
    }
    let mut parents: BTreeSet<KeywordId> = BTreeSet::new();
    for &gp in &gp_present {
        for nb in snapshot.neighbors(gp) {
            if !labels.contains_key(&nb) {
                parents.insert(nb);
            }
        }
    }
    for &k in &parents {
        labels.insert(k, CommunityLabel::Parent);
    }
    let mut children: BTreeSet<KeywordId> = BTreeSet::new();
    for &p in &parents {
        for nb in snapshot.neighbors(p) {
            if !labels.contains_key(&nb) {
                children.insert(nb);
            }
        }
    }
    for &k in &children {
        labels.insert(k, CommunityLabel::Child);
    }
    for k in snapshot.nodes() {
        labels.entry(k).or_insert(CommunityLabel::Guest);
    }

    CommunityAssignment {
        year: snapshot.year,
        variant,
        scores,
        grandparent_set: grandparents.to_vec(),
        labels,
    }
}

/// Counts of the ten unordered label-pair edge classes for one year.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypedEdgeRow {
    pub year: Year,
    pub gp: usize,
    pub p: usize,
    pub c: usize,
    pub g: usize,
    pub e_gp_gp: usize,
    pub e_gp_p: usize,
    pub e_gp_c: usize,
    pub e_gp_g: usize,
    pub e_p_p: usize,
    pub e_p_c: usize,
    pub e_p_g: usize,
    pub e_c_c: usize,
    pub e_c_g: usize,
    pub e_g_g: usize,
}

impl TypedEdgeRow {
    pub fn total_edges(&self) -> usize {
        self.e_gp_gp
            + self.e_gp_p
            + self.e_gp_c
            + self.e_gp_g
            + self.e_p_p
            + self.e_p_c
            + self.e_p_g
            + self.e_c_c
            + self.e_c_g
            + self.e_g_g
    }
}

/// Buckets every edge of every assigned year into its endpoint-label class.
pub fn typed_edge_stats(
    kcn: &TemporalKcn,
    assignments: &BTreeMap<Year, CommunityAssignment>,
) -> Result<Vec<TypedEdgeRow>, CoreError> {
    use CommunityLabel::*;
    let mut rows = Vec::new();
    for (&year, assignment) in assignments {
        let snap = kcn.snapshot(year).ok_or(CoreError::UnknownYear(year))?;
        let mut row = TypedEdgeRow {
            year,
            gp: assignment.count(Grandparent),
            p: assignment.count(Parent),
            c: assignment.count(Child),
            g: assignment.count(Guest),
            ..TypedEdgeRow::default()
        };
        for &(a, b) in snap.edges() {
            let la = assignment.label_of(a).unwrap_or(Guest);
            let lb = assignment.label_of(b).unwrap_or(Guest);
            let (lo, hi) = if la <= lb { (la, lb) } else { (lb, la) };
            match (lo, hi) {
                (Grandparent, Grandparent) => row.e_gp_gp += 1,
                (Grandparent, Parent) => row.e_gp_p += 1,
                (Grandparent, Child) => row.e_gp_c += 1,
                (Grandparent, Guest) => row.e_gp_g += 1,
                (Parent, Parent) => row.e_p_p += 1,
                (Parent, Child) => row.e_p_c += 1,
                (Parent, Guest) => row.e_p_g += 1,
                (Child, Child) => row.e_c_c += 1,
                (Child, Guest) => row.e_c_g += 1,
                (Guest, Guest) => row.e_g_g += 1,
                _ => unreachable!("pair is label-ordered"),
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// CSV dump: `year,variant,keyword,label,score`, keywords in ascending
/// canonical-string order within each assignment.
pub fn communities_csv(assignments: &[&CommunityAssignment], corpus: &Corpus) -> String {
    let mut out = String::from("year,variant,keyword,label,score\n");
    for assignment in assignments {
        let mut rows: Vec<(&str, CommunityLabel)> = assignment
            .labels()
            .iter()
            .map(|(&k, &l)| (corpus.keyword_name(k), l))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        for (kw, label) in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                assignment.year,
                assignment.variant.as_str(),
                kw,
                label.as_str(),
                fmt_real(assignment.scores.get(label))
            );
        }
    }
    out
}

/// Typed-edge CSV with node counts and all ten edge classes.
pub fn typed_edges_csv(rows_by_variant: &[(Variant, Vec<TypedEdgeRow>)]) -> String {
    let mut out = String::from(
        "year,variant,gp,p,c,g,e_gp_gp,e_gp_p,e_gp_c,e_gp_g,e_p_p,e_p_c,e_p_g,e_c_c,e_c_g,e_g_g\n",
    );
    for (variant, rows) in rows_by_variant {
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.year,
                variant.as_str(),
                r.gp,
                r.p,
                r.c,
                r.g,
                r.e_gp_gp,
                r.e_gp_p,
                r.e_gp_c,
                r.e_gp_g,
                r.e_p_p,
                r.e_p_c,
                r.e_p_g,
                r.e_c_c,
                r.e_c_g,
                r.e_g_g
            );
        }
    }
    out
}
