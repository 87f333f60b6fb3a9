//! Bibliographic record ingestion and keyword normalization.
//!
//! Records arrive as line-delimited JSON objects with fields `id`, `year`,
//! `authors`, `keywords` and `citations`. Keywords are normalized through a
//! deterministic rule table (lower-casing, punctuation stripping, ordered
//! suffix rewrites, then abbreviation/synonym lookup), deduplicated within a
//! record, and filtered corpus-wide by a minimum distinct-article count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::kcn::TemporalKcn;
use crate::{AuthorId, KeywordId, Year};

/// One ordered suffix-rewrite rule. The first rule whose suffix matches a
/// token (and whose `min_len` guard passes) is applied; a rule that maps a
/// suffix to itself acts as a protection (e.g. keep `-ss` words intact).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuffixRule {
    pub suffix: String,
    pub replace: String,
    /// Minimum token length (in chars) for the rule to fire.
    pub min_len: usize,
}

/// Deterministic keyword normalization table.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NormalizationRules {
    /// Full-string semantic merges, e.g. `aspect -> feature`.
    #[serde(default)]
    pub synonym_map: BTreeMap<String, String>,
    /// Abbreviation expansions, e.g. `bmi -> body mass index`.
    #[serde(default)]
    pub abbreviation_map: BTreeMap<String, String>,
    /// Ordered per-token suffix rewrites applied before the maps.
    #[serde(default)]
    pub plural_suffix_rules: Vec<SuffixRule>,
}

impl NormalizationRules {
    /// The built-in table: singular/plural suffix handling only, no synonym
    /// or abbreviation entries. Domain-specific maps are loaded from a rules
    /// file.
    pub fn builtin() -> Self {
        let rule = |suffix: &str, replace: &str, min_len: usize| SuffixRule {
            suffix: suffix.to_string(),
            replace: replace.to_string(),
            min_len,
        };
        NormalizationRules {
            synonym_map: BTreeMap::new(),
            abbreviation_map: BTreeMap::new(),
            plural_suffix_rules: vec![
                rule("ies", "y", 5),
                rule("sses", "ss", 6),
                // Protect -ss words ("stress", "class") from the plural rule.
                rule("ss", "ss", 0),
                rule("s", "", 4),
            ],
        }
    }

    /// Loads rules from a JSON file and validates them.
    pub fn from_path(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path)?;
        let rules: NormalizationRules = serde_json::from_str(&text)
            .map_err(|e| CoreError::BadRules(format!("{}: {e}", path.display())))?;
        rules.validate()?;
        Ok(rules)
    }

    /// Checks that map values are fixed points of the full normalization,
    /// which makes `normalize_keyword` idempotent by construction.
    pub fn validate(&self) -> Result<(), CoreError> {
        for (key, value) in self.synonym_map.iter().chain(self.abbreviation_map.iter()) {
            let renorm = normalize_keyword(value, self);
            if &renorm != value {
                return Err(CoreError::BadRules(format!(
                    "map value {value:?} (for key {key:?}) is not canonical; it normalizes to {renorm:?}"
                )));
            }
        }
        Ok(())
    }
}

fn apply_suffix_rules(token: &str, rules: &[SuffixRule]) -> String {
    for rule in rules {
        if token.chars().count() >= rule.min_len && token.ends_with(rule.suffix.as_str()) {
            let stem = &token[..token.len() - rule.suffix.len()];
            return format!("{stem}{}", rule.replace);
        }
    }
    token.to_string()
}

/// Lower-cases, strips punctuation discriminators, collapses whitespace,
/// rewrites plural suffixes per token, then applies the abbreviation and
/// synonym maps. Idempotent for validated rule tables; an empty result means
/// the keyword carries no content and should be dropped by the caller.
pub fn normalize_keyword(raw: &str, rules: &NormalizationRules) -> String {
    let lowered = raw.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let rewritten: Vec<String> = cleaned
        .split_whitespace()
        .map(|tok| apply_suffix_rules(tok, &rules.plural_suffix_rules))
        .filter(|tok| !tok.is_empty())
        .collect();
    let joined = rewritten.join(" ");
    if joined.is_empty() {
        return joined;
    }
    if let Some(expanded) = rules.abbreviation_map.get(&joined) {
        return expanded.clone();
    }
    if let Some(canonical) = rules.synonym_map.get(&joined) {
        return canonical.clone();
    }
    joined
}

/// Author strings are normalized by lower-casing and whitespace collapse
/// only; richer disambiguation maps can be layered on via the synonym table
/// of a dedicated rules file if a corpus needs it.
pub fn normalize_author(raw: &str) -> String {
    raw.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Bidirectional string <-> dense id map; ids follow first-occurrence order.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One retained publication with interned identifiers.
#[derive(Debug, Clone)]
pub struct ArticleRecord {
    pub article_id: String,
    pub year: Year,
    pub authors: Vec<AuthorId>,
    pub keywords: Vec<KeywordId>,
    pub citation_count: u32,
}

/// An ingested corpus: retained records plus the keyword/author interners.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub records: Vec<ArticleRecord>,
    pub keywords: Interner,
    pub authors: Interner,
    pub year_range: (Year, Year),
    /// Content fingerprint used to tie derived structures back to their
    /// source corpus.
    pub fingerprint: u64,
}

impl Corpus {
    pub fn keyword_name(&self, id: KeywordId) -> &str {
        self.keywords.name(id.0)
    }

    pub fn contains_year(&self, year: Year) -> bool {
        year >= self.year_range.0 && year <= self.year_range.1
    }

    pub fn years(&self) -> impl Iterator<Item = Year> {
        self.year_range.0..=self.year_range.1
    }
}

/// Ingestion knobs; `min_article_count` mirrors the rare-keyword filter.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// A keyword is retained only if it appears in at least this many
    /// distinct articles corpus-wide.
    pub min_article_count: usize,
    /// When set, a record with a year outside the range is a hard error.
    pub year_range: Option<(Year, Year)>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            min_article_count: 2,
            year_range: None,
        }
    }
}

/// Counts gathered while ingesting; `summary()` renders the plain-text
/// ingestion report.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub records_parsed: usize,
    pub records_retained: usize,
    /// Records whose keyword list became empty after normalization or
    /// rare-keyword filtering; dropped silently but counted here.
    pub records_dropped_no_keywords: usize,
    pub distinct_keywords_before_filter: usize,
    pub distinct_keywords_retained: usize,
    pub distinct_authors: usize,
    pub year_range: (Year, Year),
    pub records_per_year: BTreeMap<Year, usize>,
}

impl IngestReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "records parsed:            {}", self.records_parsed);
        let _ = writeln!(s, "records retained:          {}", self.records_retained);
        let _ = writeln!(
            s,
            "records dropped (no kw):   {}",
            self.records_dropped_no_keywords
        );
        let _ = writeln!(
            s,
            "keywords before filter:    {}",
            self.distinct_keywords_before_filter
        );
        let _ = writeln!(
            s,
            "keywords retained:         {}",
            self.distinct_keywords_retained
        );
        let _ = writeln!(s, "authors:                   {}", self.distinct_authors);
        let _ = writeln!(
            s,
            "year range:                {}..={}",
            self.year_range.0, self.year_range.1
        );
        for (year, n) in &self.records_per_year {
            let _ = writeln!(s, "records in {year}:           {n}");
        }
        s
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    year: Year,
    authors: Vec<String>,
    keywords: Vec<String>,
    citations: i64,
}

struct ParsedRecord {
    id: String,
    year: Year,
    authors: Vec<String>,
    keywords: Vec<String>, // normalized, deduplicated, non-empty strings
    citations: u32,
}

fn fnv1a(hash: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *hash ^= b as u64;
        *hash = hash.wrapping_mul(0x100000001b3);
    }
}

/// Ingests a line-delimited record file. See [`ingest_reader`].
pub fn ingest(
    path: &Path,
    rules: &NormalizationRules,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestReport), CoreError> {
    let file = File::open(path)?;
    ingest_reader(BufReader::new(file), rules, opts)
}

/// Ingests records from a reader: parses and normalizes every line, filters
/// keywords below the distinct-article threshold, drops records left without
/// keywords, and interns identifiers in first-occurrence order over the
/// retained stream (re-ingesting the same bytes yields identical indices).
pub fn ingest_reader<R: BufRead>(
    reader: R,
    rules: &NormalizationRules,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestReport), CoreError> {
    let mut parsed: Vec<ParsedRecord> = Vec::new();
    let mut article_counts: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CoreError::MalformedRecord {
            line: line_no,
            msg: e.to_string(),
        })?;
        if raw.citations < 0 {
            return Err(CoreError::MalformedRecord {
                line: line_no,
                msg: format!("negative citation count {}", raw.citations),
            });
        }
        if let Some((lo, hi)) = opts.year_range {
            if raw.year < lo || raw.year > hi {
                return Err(CoreError::YearOutOfRange {
                    line: line_no,
                    id: raw.id,
                    year: raw.year,
                    lo,
                    hi,
                });
            }
        }

        let mut seen = HashSet::new();
        let mut keywords = Vec::new();
        for kw in &raw.keywords {
            let norm = normalize_keyword(kw, rules);
            if !norm.is_empty() && seen.insert(norm.clone()) {
                keywords.push(norm);
            }
        }
        for kw in &keywords {
            *article_counts.entry(kw.clone()).or_insert(0) += 1;
        }
        let authors = raw
            .authors
            .iter()
            .map(|a| normalize_author(a))
            .filter(|a| !a.is_empty())
            .collect();
        parsed.push(ParsedRecord {
            id: raw.id,
            year: raw.year,
            authors,
            keywords,
            citations: raw.citations as u32,
        });
    }

    let retained_kw: HashSet<&String> = article_counts
        .iter()
        .filter(|(_, &n)| n >= opts.min_article_count)
        .map(|(kw, _)| kw)
        .collect();

    let mut keywords = Interner::default();
    let mut authors = Interner::default();
    let mut records = Vec::new();
    let mut report = IngestReport {
        records_parsed: parsed.len(),
        distinct_keywords_before_filter: article_counts.len(),
        ..IngestReport::default()
    };
    let mut fingerprint: u64 = 0xcbf29ce484222325;

    for rec in &parsed {
        let kept: Vec<KeywordId> = rec
            .keywords
            .iter()
            .filter(|kw| retained_kw.contains(kw))
            .map(|kw| KeywordId(keywords.intern(kw)))
            .collect();
        if kept.is_empty() {
            report.records_dropped_no_keywords += 1;
            continue;
        }
        let author_ids: Vec<AuthorId> = rec
            .authors
            .iter()
            .map(|a| AuthorId(authors.intern(a)))
            .collect();
        fnv1a(&mut fingerprint, rec.id.as_bytes());
        fnv1a(&mut fingerprint, &rec.year.to_le_bytes());
        *report.records_per_year.entry(rec.year).or_insert(0) += 1;
        records.push(ArticleRecord {
            article_id: rec.id.clone(),
            year: rec.year,
            authors: author_ids,
            keywords: kept,
            citation_count: rec.citations,
        });
    }

    if records.is_empty() {
        return Err(CoreError::MalformedRecord {
            line: 0,
            msg: "no records retained after normalization and filtering".into(),
        });
    }

    let min_year = records.iter().map(|r| r.year).min().unwrap();
    let max_year = records.iter().map(|r| r.year).max().unwrap();
    let year_range = opts.year_range.unwrap_or((min_year, max_year));

    report.records_retained = records.len();
    report.distinct_keywords_retained = keywords.len();
    report.distinct_authors = authors.len();
    report.year_range = year_range;

    Ok((
        Corpus {
            records,
            keywords,
            authors,
            year_range,
            fingerprint,
        },
        report,
    ))
}

/// Per-year keyword/edge evolution counts. The four edge classes partition
/// the year's edge set; `v_n + v_o = v_t` by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolutionRow {
    pub year: Year,
    pub v_t: usize,
    pub v_n: usize,
    pub v_o: usize,
    pub e: usize,
    pub e_oo_rec: usize,
    pub e_oo_new: usize,
    pub e_no: usize,
    pub e_nn: usize,
}

/// Classifies each year's keywords as new/old and each edge as recurring
/// old-old, new old-old, new-old, or new-new. "Old" means seen in any prior
/// snapshot; "recurring" means the pair itself occurred in a prior snapshot.
pub fn yearly_evolution_stats(
    corpus: &Corpus,
    kcn: &TemporalKcn,
) -> Result<Vec<EvolutionRow>, CoreError> {
    if kcn.corpus_fingerprint() != corpus.fingerprint {
        return Err(CoreError::CorpusMismatch);
    }
    let mut seen_nodes: HashSet<KeywordId> = HashSet::new();
    let mut seen_edges: HashSet<(KeywordId, KeywordId)> = HashSet::new();
    let mut rows = Vec::new();
    for snap in kcn.snapshots() {
        let new_nodes: HashSet<KeywordId> = snap
            .nodes()
            .filter(|k| !seen_nodes.contains(k))
            .collect();
        let v_t = snap.node_count();
        let v_n = new_nodes.len();
        let mut row = EvolutionRow {
            year: snap.year,
            v_t,
            v_n,
            v_o: v_t - v_n,
            e: snap.edge_count(),
            e_oo_rec: 0,
            e_oo_new: 0,
            e_no: 0,
            e_nn: 0,
        };
        for &(a, b) in snap.edges() {
            let a_new = new_nodes.contains(&a);
            let b_new = new_nodes.contains(&b);
            match (a_new, b_new) {
                (true, true) => row.e_nn += 1,
                (true, false) | (false, true) => row.e_no += 1,
                (false, false) => {
                    if seen_edges.contains(&(a, b)) {
                        row.e_oo_rec += 1;
                    } else {
                        row.e_oo_new += 1;
                    }
                }
            }
        }
        seen_nodes.extend(snap.nodes());
        seen_edges.extend(snap.edges().iter().copied());
        rows.push(row);
    }
    Ok(rows)
}

/// Renders the evolution table as CSV with the pinned header.
pub fn evolution_csv(rows: &[EvolutionRow]) -> String {
    let mut out = String::from("year,v_t,v_n,v_o,e,e_oo_rec,e_oo_new,e_no,e_nn\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.year, r.v_t, r.v_n, r.v_o, r.e, r.e_oo_rec, r.e_oo_new, r.e_no, r.e_nn
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kcn::build_temporal_kcn;
    use std::io::Cursor;

    fn record_line(id: &str, year: i32, authors: &[&str], keywords: &[&str], cites: i64) -> String {
        serde_json::json!({
            "id": id, "year": year, "authors": authors,
            "keywords": keywords, "citations": cites
        })
        .to_string()
    }

    fn ingest_lines(lines: &[String], opts: &IngestOptions) -> Result<(Corpus, IngestReport), CoreError> {
        let text = lines.join("\n");
        ingest_reader(Cursor::new(text), &NormalizationRules::builtin(), opts)
    }

    #[test]
    fn normalize_handles_plurals_and_case() {
        let rules = NormalizationRules::builtin();
        assert_eq!(normalize_keyword("Dilator Muscles", &rules), "dilator muscle");
        assert_eq!(normalize_keyword("sleep", &rules), "sleep");
        assert_eq!(
            normalize_keyword("Epidemiological  Studies", &rules),
            "epidemiological study"
        );
        // -ss words are protected, punctuation becomes a separator.
        assert_eq!(normalize_keyword("Stress", &rules), "stress");
        assert_eq!(normalize_keyword("body-mass index", &rules), "body mass index");
    }

    #[test]
    fn normalize_applies_abbreviations() {
        let mut rules = NormalizationRules::builtin();
        rules
            .abbreviation_map
            .insert("bmi".into(), "body mass index".into());
        rules.validate().unwrap();
        assert_eq!(normalize_keyword("bmi", &rules), "body mass index");
        assert_eq!(normalize_keyword("BMI", &rules), "body mass index");
    }

    #[test]
    fn normalize_is_idempotent_on_samples() {
        let mut rules = NormalizationRules::builtin();
        rules.synonym_map.insert("aspect".into(), "feature".into());
        rules
            .abbreviation_map
            .insert("bmi".into(), "body mass index".into());
        rules.validate().unwrap();
        for raw in [
            "Dilator Muscles",
            "bmi",
            "aspects!!",
            "  sleep   apnea ",
            "STRESS-related Diseases",
            "余暇活動",
        ] {
            let once = normalize_keyword(raw, &rules);
            let twice = normalize_keyword(&once, &rules);
            assert_eq!(once, twice, "not idempotent for {raw:?}");
        }
    }

    #[test]
    fn validate_rejects_non_canonical_values() {
        let mut rules = NormalizationRules::builtin();
        // Value "studies" itself rewrites to "study": not a fixed point.
        rules.synonym_map.insert("trial".into(), "studies".into());
        assert!(matches!(rules.validate(), Err(CoreError::BadRules(_))));
    }

    #[test]
    fn rare_keywords_are_filtered() {
        let lines = vec![
            record_line("a1", 2000, &["A"], &["x", "shared"], 1),
            record_line("a2", 2000, &["B"], &["shared"], 0),
            record_line("a3", 2001, &["C"], &["shared"], 2),
        ];
        let (corpus, report) = ingest_lines(&lines, &IngestOptions::default()).unwrap();
        assert_eq!(corpus.keywords.len(), 1);
        assert!(corpus.keywords.get("x").is_none());
        assert_eq!(report.records_retained, 3);
        assert_eq!(report.distinct_keywords_before_filter, 2);
    }

    #[test]
    fn duplicate_keywords_dedup_within_record() {
        let lines = vec![
            record_line("a1", 2000, &["A"], &["sleep", "Sleep", "SLEEP"], 0),
            record_line("a2", 2000, &["B"], &["sleep"], 0),
        ];
        let (corpus, _) = ingest_lines(&lines, &IngestOptions::default()).unwrap();
        assert_eq!(corpus.keywords.len(), 1);
        assert_eq!(corpus.records.len(), 2);
        assert_eq!(corpus.records[0].keywords.len(), 1);
    }

    #[test]
    fn records_without_keywords_are_dropped_and_counted() {
        let lines = vec![
            record_line("a1", 2000, &["A"], &["only once"], 0),
            record_line("a2", 2000, &["B"], &["kept"], 0),
            record_line("a3", 2001, &["C"], &["kept"], 0),
        ];
        let (corpus, report) = ingest_lines(&lines, &IngestOptions::default()).unwrap();
        assert_eq!(report.records_dropped_no_keywords, 1);
        assert_eq!(corpus.records.len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!(
            "{}\nnot json at all\n",
            record_line("a1", 2000, &["A"], &["x"], 0)
        );
        let err = ingest_reader(
            Cursor::new(text),
            &NormalizationRules::builtin(),
            &IngestOptions::default(),
        )
        .unwrap_err();
        match err {
            CoreError::MalformedRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn year_outside_configured_range_errors() {
        let lines = vec![record_line("a1", 1999, &["A"], &["x"], 0)];
        let opts = IngestOptions {
            min_article_count: 1,
            year_range: Some((2000, 2005)),
        };
        assert!(matches!(
            ingest_lines(&lines, &opts),
            Err(CoreError::YearOutOfRange { year: 1999, .. })
        ));
    }

    #[test]
    fn reingest_yields_identical_indices() {
        let lines = vec![
            record_line("a1", 2000, &["Alice A", "Bob B"], &["kw b", "kw a"], 3),
            record_line("a2", 2001, &["Bob B"], &["kw a", "kw b", "kw c"], 1),
            record_line("a3", 2001, &["Cara C"], &["kw c"], 0),
        ];
        let opts = IngestOptions {
            min_article_count: 1,
            year_range: None,
        };
        let (c1, _) = ingest_lines(&lines, &opts).unwrap();
        let (c2, _) = ingest_lines(&lines, &opts).unwrap();
        for id in 0..c1.keywords.len() as u32 {
            assert_eq!(c1.keywords.name(id), c2.keywords.name(id));
        }
        for id in 0..c1.authors.len() as u32 {
            assert_eq!(c1.authors.name(id), c2.authors.name(id));
        }
        assert_eq!(c1.fingerprint, c2.fingerprint);
    }

    #[test]
    fn evolution_first_year_is_all_new() {
        let lines = vec![
            record_line("a1", 2000, &["A"], &["x", "y"], 0),
            record_line("a2", 2000, &["B"], &["x", "y"], 0),
        ];
        let opts = IngestOptions {
            min_article_count: 1,
            year_range: None,
        };
        let (corpus, _) = ingest_lines(&lines, &opts).unwrap();
        let kcn = build_temporal_kcn(&corpus);
        let rows = yearly_evolution_stats(&corpus, &kcn).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].v_o, 0);
        assert_eq!(rows[0].e, rows[0].e_nn);
    }

    #[test]
    fn evolution_repeated_year_is_all_recurring() {
        let lines = vec![
            record_line("a1", 2000, &["A"], &["x", "y"], 0),
            record_line("a2", 2001, &["A"], &["x", "y"], 0),
        ];
        let opts = IngestOptions {
            min_article_count: 1,
            year_range: None,
        };
        let (corpus, _) = ingest_lines(&lines, &opts).unwrap();
        let kcn = build_temporal_kcn(&corpus);
        let rows = yearly_evolution_stats(&corpus, &kcn).unwrap();
        assert_eq!(rows[1].v_n, 0);
        assert_eq!(rows[1].e_oo_rec, rows[1].e);
        assert_eq!(rows[1].e_oo_new + rows[1].e_no + rows[1].e_nn, 0);
    }
}
