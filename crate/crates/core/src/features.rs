//! Temporal feature construction for non-connected keyword pairs.
//!
//! Each labeled instance is a keyword pair with one feature vector per
//! training year: both endpoints' per-keyword features (three z-scored
//! centralities, relative citation score, presence flag, community one-hots
//! per variant) plus five aggregated pair features (temporal community
//! importance for each centrality variant, citation-weighted recency, and
//! preferential attachment).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::centrality::{centrality_table, CentralityTable, Variant};
use crate::corpus::Corpus;
use crate::error::CoreError;
use crate::genealogy::{assign_communities, top_n_central, CommunityAssignment, CommunityLabel, CommunityScores};
use crate::kcn::{TemporalKcn, YearlySnapshot};
use crate::{fmt_real, KeywordId, Year};

/// Named layout of the per-year instance feature vector.
#[derive(Debug, Clone)]
pub struct FeatureLayout {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

const ENDPOINTS: [&str; 2] = ["a", "b"];
const LABEL_SUFFIXES: [&str; 4] = ["gp", "p", "c", "g"];

impl FeatureLayout {
    /// The standard 39-dimensional layout: 17 per-keyword dims for each
    /// endpoint followed by the 5 aggregated pair dims.
    pub fn standard() -> Self {
        let mut names = Vec::new();
        for e in ENDPOINTS {
            names.push(format!("{e}_v_au"));
            names.push(format!("{e}_v_at"));
            names.push(format!("{e}_v_d"));
            names.push(format!("{e}_citation_rel"));
            names.push(format!("{e}_present"));
            for variant in Variant::ALL {
                for label in LABEL_SUFFIXES {
                    names.push(format!("{e}_comm_{}_{label}", variant.as_str()));
                }
            }
        }
        for agg in ["score_h_au", "score_h_at", "score_h_d", "score_w", "score_pa"] {
            names.push(agg.to_string());
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        FeatureLayout { names, index }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// A selectable projection of the full vector: the dims a classifier and its
/// forecasters see for one evaluated feature set.
#[derive(Debug, Clone)]
pub struct FeatureSetSpec {
    pub name: String,
    /// Indices into the full layout, in projection order.
    pub dims: Vec<usize>,
    /// Indices *within the projection* holding plain numeric values.
    pub numeric: Vec<usize>,
    /// Index groups *within the projection* forming one-hot community
    /// blocks (forecast categorically, one forecaster per block).
    pub blocks: Vec<Vec<usize>>,
}

/// The evaluated feature sets: one per aggregated feature, mirroring the
/// reported comparisons, plus a joint set with every dimension.
pub const FEATURE_SET_NAMES: [&str; 5] = ["h_au", "h_at", "h_d", "w", "pa"];

impl FeatureSetSpec {
    pub fn by_name(layout: &FeatureLayout, name: &str) -> Option<FeatureSetSpec> {
        let idx = |n: &str| layout.index_of(n).expect("standard layout name");
        let community_set = |variant: &str| -> FeatureSetSpec {
            let mut dims = vec![idx(&format!("a_v_{variant}")), idx(&format!("b_v_{variant}"))];
            let mut blocks = Vec::new();
            for e in ENDPOINTS {
                let block: Vec<usize> = LABEL_SUFFIXES
                    .iter()
                    .map(|l| idx(&format!("{e}_comm_{variant}_{l}")))
                    .collect();
                blocks.push((dims.len()..dims.len() + block.len()).collect());
                dims.extend(block);
            }
            dims.push(idx(&format!("score_h_{variant}")));
            FeatureSetSpec {
                name: format!("h_{variant}"),
                numeric: vec![0, 1, dims.len() - 1],
                dims,
                blocks,
            }
        };
        match name {
            "h_au" => Some(community_set("au")),
            "h_at" => Some(community_set("at")),
            "h_d" => Some(community_set("d")),
            "w" => Some(FeatureSetSpec {
                name: "w".into(),
                dims: vec![idx("a_citation_rel"), idx("b_citation_rel"), idx("score_w")],
                numeric: vec![0, 1, 2],
                blocks: Vec::new(),
            }),
            "pa" => Some(FeatureSetSpec {
                name: "pa".into(),
                dims: vec![idx("score_pa")],
                numeric: vec![0],
                blocks: Vec::new(),
            }),
            "all" => {
                let dims: Vec<usize> = (0..layout.dim()).collect();
                let mut blocks = Vec::new();
                let mut in_block = vec![false; layout.dim()];
                for e in ENDPOINTS {
                    for variant in Variant::ALL {
                        let block: Vec<usize> = LABEL_SUFFIXES
                            .iter()
                            .map(|l| idx(&format!("{e}_comm_{}_{l}", variant.as_str())))
                            .collect();
                        for &d in &block {
                            in_block[d] = true;
                        }
                        blocks.push(block);
                    }
                }
                let numeric = (0..layout.dim()).filter(|&d| !in_block[d]).collect();
                Some(FeatureSetSpec {
                    name: "all".into(),
                    dims,
                    numeric,
                    blocks,
                })
            }
            _ => None,
        }
    }

    /// Projects a full vector onto this set's dims.
    pub fn project(&self, full: &[f64]) -> Vec<f64> {
        self.dims.iter().map(|&d| full[d]).collect()
    }
}

/// Per-keyword per-year feature values before assembly into the pair vector.
#[derive(Debug, Clone, Copy)]
pub struct KeywordYearFeatures {
    pub v_au: f64,
    pub v_at: f64,
    pub v_d: f64,
    pub citation_rel: f64,
    pub present: bool,
    /// Community label per centrality variant; `None` when absent that year.
    pub community: [Option<CommunityLabel>; 3],
}

/// Eq.-style pair aggregation: community score times centrality, summed over
/// both endpoints. Symmetric under endpoint swap.
pub fn community_importance(g_a: f64, v_a: f64, g_b: f64, v_b: f64) -> f64 {
    g_a * v_a + g_b * v_b
}

/// Citation-weighted recency: the endpoints' yearly citation sums scaled by
/// the co-presence factor gamma (2 if both appear that year, 1 if exactly
/// one does, 0 otherwise) and the 1-based training-year index.
pub fn citation_weighted_recency(
    h_a: f64,
    h_b: f64,
    appears_a: bool,
    appears_b: bool,
    t_index: usize,
) -> f64 {
    let gamma = match (appears_a, appears_b) {
        (true, true) => 2.0,
        (true, false) | (false, true) => 1.0,
        (false, false) => 0.0,
    };
    (h_a + h_b) * gamma * t_index as f64
}

/// Degree product in a snapshot; zero when either endpoint is absent.
pub fn preferential_attachment(snapshot: &YearlySnapshot, a: KeywordId, b: KeywordId) -> u64 {
    snapshot.degree(a) as u64 * snapshot.degree(b) as u64
}

/// Raw per-keyword citation sums for one year: total citations of the year's
/// articles containing the keyword.
pub fn citation_raw(corpus: &Corpus, year: Year) -> BTreeMap<KeywordId, f64> {
    let mut sums: BTreeMap<KeywordId, f64> = BTreeMap::new();
    for rec in corpus.records.iter().filter(|r| r.year == year) {
        for &k in &rec.keywords {
            *sums.entry(k).or_insert(0.0) += rec.citation_count as f64;
        }
    }
    sums
}

/// Relative citation score: raw sums max-normalized within the year, all
/// zeros when the year's maximum is zero.
pub fn citation_relative(corpus: &Corpus, year: Year) -> BTreeMap<KeywordId, f64> {
    let raw = citation_raw(corpus, year);
    let max = raw.values().copied().fold(0.0f64, f64::max);
    if max == 0.0 {
        return raw.keys().map(|&k| (k, 0.0)).collect();
    }
    raw.into_iter().map(|(k, v)| (k, v / max)).collect()
}

/// Everything needed to evaluate per-year features: centrality tables and
/// community assignments per (year, variant), citation maps, and the year
/// split. Tables cover the bootstrap year (when present) through the test
/// year; assignments cover the training years and the test year.
pub struct FeatureContext<'a> {
    pub corpus: &'a Corpus,
    pub kcn: &'a TemporalKcn,
    pub train_years: Vec<Year>,
    pub test_year: Year,
    pub tables: BTreeMap<(Year, Variant), CentralityTable>,
    pub assignments: BTreeMap<(Year, Variant), CommunityAssignment>,
    citation_rel: BTreeMap<Year, BTreeMap<KeywordId, f64>>,
    citation_raw: BTreeMap<Year, BTreeMap<KeywordId, f64>>,
    layout: FeatureLayout,
}

/// Knobs for the context build.
#[derive(Debug, Clone)]
pub struct FeatureParams {
    pub top_n: usize,
    pub n_iters: usize,
    pub community_scores: CommunityScores,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            top_n: 20,
            n_iters: 20,
            community_scores: CommunityScores::default(),
        }
    }
}

impl<'a> FeatureContext<'a> {
    pub fn build(
        corpus: &'a Corpus,
        kcn: &'a TemporalKcn,
        train_years: Vec<Year>,
        test_year: Year,
        params: &FeatureParams,
    ) -> Result<Self, CoreError> {
        assert!(!train_years.is_empty(), "training period must be non-empty");
        let first_train = train_years[0];
        let bootstrap = first_train - 1;
        let table_first = if corpus.contains_year(bootstrap) {
            bootstrap
        } else {
            first_train
        };

        let mut tables = BTreeMap::new();
        // Per-year table construction is independent across (year, variant);
        // compute in parallel and collect in deterministic order.
        let jobs: Vec<(Year, Variant)> = (table_first..=test_year)
            .flat_map(|y| Variant::ALL.into_iter().map(move |v| (y, v)))
            .collect();
        let computed: Vec<Result<CentralityTable, CoreError>> = {
            use rayon::prelude::*;
            jobs.par_iter()
                .map(|&(y, v)| centrality_table(kcn, corpus, y, v, params.n_iters))
                .collect()
        };
        for ((y, v), table) in jobs.into_iter().zip(computed) {
            tables.insert((y, v), table?);
        }

        let mut assignments = BTreeMap::new();
        for year in first_train..=test_year {
            let snap = kcn.snapshot(year).ok_or(CoreError::UnknownYear(year))?;
            for variant in Variant::ALL {
                let grandparents = tables
                    .get(&(year - 1, variant))
                    .map(|t| top_n_central(t, params.top_n))
                    .unwrap_or_default();
                assignments.insert(
                    (year, variant),
                    assign_communities(snap, variant, &grandparents, params.community_scores),
                );
            }
        }

        let mut rel = BTreeMap::new();
        let mut raw = BTreeMap::new();
        for year in first_train..=test_year {
            rel.insert(year, citation_relative(corpus, year));
            raw.insert(year, citation_raw(corpus, year));
        }

        Ok(FeatureContext {
            corpus,
            kcn,
            train_years,
            test_year,
            tables,
            assignments,
            citation_rel: rel,
            citation_raw: raw,
            layout: FeatureLayout::standard(),
        })
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    fn keyword_year(&self, k: KeywordId, year: Year) -> KeywordYearFeatures {
        let snap = self.kcn.snapshot(year).expect("year within range");
        let present = snap.contains_node(k);
        let z = |variant: Variant| -> f64 {
            self.tables
                .get(&(year, variant))
                .and_then(|t| t.zscore(k))
                .unwrap_or(0.0)
        };
        let community = if present {
            let label = |variant: Variant| {
                self.assignments
                    .get(&(year, variant))
                    .and_then(|a| a.label_of(k))
            };
            [label(Variant::Au), label(Variant::At), label(Variant::D)]
        } else {
            [None, None, None]
        };
        KeywordYearFeatures {
            v_au: z(Variant::Au),
            v_at: z(Variant::At),
            v_d: z(Variant::D),
            citation_rel: self
                .citation_rel
                .get(&year)
                .and_then(|m| m.get(&k))
                .copied()
                .unwrap_or(0.0),
            present,
            community,
        }
    }

    /// Assembles the full (un-normalized) feature vector for a pair in one
    /// year; `t_index` is the 1-based year index used by the recency score.
    pub fn pair_year_vector(
        &self,
        a: KeywordId,
        b: KeywordId,
        year: Year,
        t_index: usize,
    ) -> Vec<f64> {
        let snap = self.kcn.snapshot(year).expect("year within range");
        let fa = self.keyword_year(a, year);
        let fb = self.keyword_year(b, year);
        let mut v = Vec::with_capacity(self.layout.dim());
        for f in [&fa, &fb] {
            v.push(f.v_au);
            v.push(f.v_at);
            v.push(f.v_d);
            v.push(f.citation_rel);
            v.push(if f.present { 1.0 } else { 0.0 });
            for (vi, _) in Variant::ALL.iter().enumerate() {
                for label in CommunityLabel::ALL {
                    v.push(if f.community[vi] == Some(label) { 1.0 } else { 0.0 });
                }
            }
        }
        let scores = |variant: Variant, va: f64, vb: f64| -> f64 {
            let g = |k: KeywordId| {
                self.assignments
                    .get(&(year, variant))
                    .and_then(|asg| asg.score_of(k))
                    .unwrap_or(0.0)
            };
            community_importance(g(a), va, g(b), vb)
        };
        v.push(scores(Variant::Au, fa.v_au, fb.v_au));
        v.push(scores(Variant::At, fa.v_at, fb.v_at));
        v.push(scores(Variant::D, fa.v_d, fb.v_d));
        let h = |k: KeywordId| {
            self.citation_raw
                .get(&year)
                .and_then(|m| m.get(&k))
                .copied()
                .unwrap_or(0.0)
        };
        v.push(citation_weighted_recency(
            h(a),
            h(b),
            fa.present,
            fb.present,
            t_index,
        ));
        v.push(preferential_attachment(snap, a, b) as f64);
        debug_assert_eq!(v.len(), self.layout.dim());
        v
    }
}

/// A non-connected pair with its label and per-training-year series.
#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub pair: (KeywordId, KeywordId),
    pub label: bool,
    pub series: Vec<Vec<f64>>,
}

/// The assembled instance set with frozen normalization statistics and the
/// actual (normalized) test-year vectors used to score forecasts.
#[derive(Debug, Clone)]
pub struct InstanceSet {
    pub instances: Vec<LabeledInstance>,
    pub layout: FeatureLayout,
    pub train_years: Vec<Year>,
    pub test_year: Year,
    /// Per-dim (min, max) over training-year data of all instances.
    pub norm: Vec<(f64, f64)>,
    pub test_actuals: Vec<Vec<f64>>,
}

fn normalized_pair(a: KeywordId, b: KeywordId) -> (KeywordId, KeywordId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Builds the labeled instance set:
///
/// - positives: pairs of `V_T` (keywords present in both phases) with no
///   training-year edge that gain an edge in the test year,
/// - negatives: a seeded uniform sample, without replacement, of pairs of
///   `V_T` connected in neither phase, exactly `ratio` per positive,
/// - per-dim min-max normalization frozen from training-year data and
///   applied to everything (constant dims map to zero).
pub fn build_instances(
    ctx: &FeatureContext,
    ratio_neg_per_pos: usize,
    rng_seed: u64,
) -> Result<InstanceSet, CoreError> {
    assert!(ratio_neg_per_pos >= 1);
    let test_snap = ctx
        .kcn
        .snapshot(ctx.test_year)
        .ok_or(CoreError::UnknownYear(ctx.test_year))?;

    let mut train_nodes: BTreeSet<KeywordId> = BTreeSet::new();
    let mut train_edges: HashSet<(KeywordId, KeywordId)> = HashSet::new();
    for &year in &ctx.train_years {
        let snap = ctx.kcn.snapshot(year).ok_or(CoreError::UnknownYear(year))?;
        train_nodes.extend(snap.nodes());
        train_edges.extend(snap.edges().iter().copied());
    }
    let v_t: Vec<KeywordId> = train_nodes
        .iter()
        .copied()
        .filter(|&k| test_snap.contains_node(k))
        .collect();
    let v_t_set: BTreeSet<KeywordId> = v_t.iter().copied().collect();

    let positives: Vec<(KeywordId, KeywordId)> = test_snap
        .edges()
        .iter()
        .copied()
        .filter(|&(a, b)| {
            v_t_set.contains(&a) && v_t_set.contains(&b) && !train_edges.contains(&(a, b))
        })
        .collect();
    if positives.is_empty() {
        return Err(CoreError::NoPositives);
    }

    // Eligible negatives: V_T pairs connected in neither phase.
    let mut eligible: Vec<(KeywordId, KeywordId)> = Vec::new();
    for (i, &a) in v_t.iter().enumerate() {
        for &b in &v_t[i + 1..] {
            let pair = normalized_pair(a, b);
            if !train_edges.contains(&pair) && !test_snap.has_edge(pair.0, pair.1) {
                eligible.push(pair);
            }
        }
    }
    let requested = ratio_neg_per_pos * positives.len();
    if eligible.len() < requested {
        return Err(CoreError::NegativeShortfall {
            requested,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(1);
    // Partial Fisher-Yates over the sorted eligible list.
    for i in 0..requested {
        let j = rng.random_range(i..eligible.len());
        eligible.swap(i, j);
    }
    let negatives = &eligible[..requested];

    let mut instances: Vec<LabeledInstance> = Vec::with_capacity(positives.len() + requested);
    for &pair in &positives {
        instances.push(LabeledInstance {
            pair,
            label: true,
            series: Vec::new(),
        });
    }
    for &pair in negatives {
        instances.push(LabeledInstance {
            pair,
            label: false,
            series: Vec::new(),
        });
    }

    // Assemble raw series in parallel; instance order stays fixed.
    let series: Vec<(Vec<Vec<f64>>, Vec<f64>)> = {
        use rayon::prelude::*;
        instances
            .par_iter()
            .map(|inst| {
                let (a, b) = inst.pair;
                let series: Vec<Vec<f64>> = ctx
                    .train_years
                    .iter()
                    .enumerate()
                    .map(|(i, &year)| ctx.pair_year_vector(a, b, year, i + 1))
                    .collect();
                let actual =
                    ctx.pair_year_vector(a, b, ctx.test_year, ctx.train_years.len() + 1);
                (series, actual)
            })
            .collect()
    };

    let dim = ctx.layout.dim();
    let mut norm = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
    for (s, _) in &series {
        for v in s {
            for (d, &x) in v.iter().enumerate() {
                norm[d].0 = norm[d].0.min(x);
                norm[d].1 = norm[d].1.max(x);
            }
        }
    }
    let apply = |v: &mut Vec<f64>| {
        for (d, x) in v.iter_mut().enumerate() {
            let (lo, hi) = norm[d];
            *x = if hi > lo { (*x - lo) / (hi - lo) } else { 0.0 };
        }
    };
    let mut test_actuals = Vec::with_capacity(instances.len());
    for (inst, (mut s, mut actual)) in instances.iter_mut().zip(series) {
        s.iter_mut().for_each(&apply);
        apply(&mut actual);
        inst.series = s;
        test_actuals.push(actual);
    }

    Ok(InstanceSet {
        instances,
        layout: ctx.layout.clone(),
        train_years: ctx.train_years.clone(),
        test_year: ctx.test_year,
        norm,
        test_actuals,
    })
}

impl InstanceSet {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Long-format dump: `pair_a,pair_b,label,year,feature_name,value`.
    pub fn write_instances_csv<W: Write>(&self, corpus: &Corpus, mut w: W) -> std::io::Result<()> {
        writeln!(w, "pair_a,pair_b,label,year,feature_name,value")?;
        for inst in &self.instances {
            let (a, b) = inst.pair;
            let label = if inst.label { "positive" } else { "negative" };
            for (i, year_vec) in inst.series.iter().enumerate() {
                let year = self.train_years[i];
                for (d, &value) in year_vec.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        corpus.keyword_name(a),
                        corpus.keyword_name(b),
                        label,
                        year,
                        self.layout.names()[d],
                        fmt_real(value)
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Same long format for the actual (normalized) test-year vectors.
    pub fn write_test_actuals_csv<W: Write>(
        &self,
        corpus: &Corpus,
        mut w: W,
    ) -> std::io::Result<()> {
        writeln!(w, "pair_a,pair_b,label,year,feature_name,value")?;
        for (inst, actual) in self.instances.iter().zip(&self.test_actuals) {
            let (a, b) = inst.pair;
            let label = if inst.label { "positive" } else { "negative" };
            for (d, &value) in actual.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    corpus.keyword_name(a),
                    corpus.keyword_name(b),
                    label,
                    self.test_year,
                    self.layout.names()[d],
                    fmt_real(value)
                )?;
            }
        }
        Ok(())
    }

    /// Class-conditional densities of the aggregated features over all
    /// training-year values, binned over [0, 1].
    pub fn densities_csv(&self, bins: usize) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("feature,label,bin_left,bin_right,density\n");
        let width = 1.0 / bins as f64;
        for agg in ["score_h_au", "score_h_at", "score_h_d", "score_w", "score_pa"] {
            let d = self.layout.index_of(agg).unwrap();
            for (label, positive) in [("positive", true), ("negative", false)] {
                let values: Vec<f64> = self
                    .instances
                    .iter()
                    .filter(|i| i.label == positive)
                    .flat_map(|i| i.series.iter().map(move |v| v[d]))
                    .collect();
                let mut counts = vec![0usize; bins];
                for &v in &values {
                    let bin = ((v / width) as usize).min(bins - 1);
                    counts[bin] += 1;
                }
                let n = values.len().max(1) as f64;
                for (b, &c) in counts.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{agg},{label},{},{},{}",
                        fmt_real(b as f64 * width),
                        fmt_real((b + 1) as f64 * width),
                        fmt_real(c as f64 / (n * width))
                    );
                }
            }
        }
        out
    }

    /// Parses an instance dump produced by [`Self::write_instances_csv`]
    /// (also used for the test-actual dump). Instances come back in
    /// first-seen order, matching the written order.
    pub fn read_long_csv<R: BufRead>(
        reader: R,
        corpus: &Corpus,
        layout: &FeatureLayout,
    ) -> Result<Vec<(KeywordId, KeywordId, bool, BTreeMap<Year, Vec<f64>>)>, CoreError> {
        let mut order: Vec<(KeywordId, KeywordId)> = Vec::new();
        let mut by_pair: HashMap<(KeywordId, KeywordId), (bool, BTreeMap<Year, Vec<f64>>)> =
            HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if idx == 0 || line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 6 {
                return Err(CoreError::BadMetricInput(format!(
                    "instance csv line {}: expected 6 fields",
                    idx + 1
                )));
            }
            let bad = |what: &str| CoreError::BadMetricInput(format!(
                "instance csv line {}: {what}",
                idx + 1
            ));
            let a = corpus
                .keywords
                .get(parts[0])
                .map(KeywordId)
                .ok_or_else(|| bad("unknown keyword"))?;
            let b = corpus
                .keywords
                .get(parts[1])
                .map(KeywordId)
                .ok_or_else(|| bad("unknown keyword"))?;
            let label = match parts[2] {
                "positive" => true,
                "negative" => false,
                _ => return Err(bad("bad label")),
            };
            let year: Year = parts[3].parse().map_err(|_| bad("bad year"))?;
            let dim = layout
                .index_of(parts[4])
                .ok_or_else(|| bad("unknown feature name"))?;
            let value: f64 = parts[5].parse().map_err(|_| bad("bad value"))?;
            let entry = by_pair.entry((a, b)).or_insert_with(|| {
                order.push((a, b));
                (label, BTreeMap::new())
            });
            entry
                .1
                .entry(year)
                .or_insert_with(|| vec![0.0; layout.dim()])[dim] = value;
        }
        Ok(order
            .into_iter()
            .map(|pair| {
                let (label, years) = by_pair.remove(&pair).unwrap();
                (pair.0, pair.1, label, years)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_reader, IngestOptions, NormalizationRules};
    use crate::kcn::build_temporal_kcn;
    use std::io::Cursor;

    fn line(id: &str, year: i32, keywords: &[&str], citations: i64) -> String {
        serde_json::json!({
            "id": id, "year": year, "authors": ["A"],
            "keywords": keywords, "citations": citations
        })
        .to_string()
    }

    fn corpus_from(lines: &[String]) -> Corpus {
        let opts = IngestOptions {
            min_article_count: 1,
            year_range: None,
        };
        ingest_reader(
            Cursor::new(lines.join("\n")),
            &NormalizationRules::builtin(),
            &opts,
        )
        .unwrap()
        .0
    }

    #[test]
    fn community_importance_direct_substitution() {
        assert!((community_importance(1.0, 0.8, 0.25, 0.4) - 0.9).abs() < 1e-15);
        assert_eq!(community_importance(0.7, 0.0, 0.3, 0.0), 0.0);
        // Symmetric under endpoint swap.
        assert_eq!(
            community_importance(1.0, 0.8, 0.25, 0.4),
            community_importance(0.25, 0.4, 1.0, 0.8)
        );
    }

    #[test]
    fn recency_gamma_casework() {
        assert_eq!(citation_weighted_recency(3.0, 2.0, true, true, 4), 40.0);
        assert_eq!(citation_weighted_recency(3.0, 2.0, false, false, 9), 0.0);
        assert_eq!(citation_weighted_recency(3.0, 0.0, true, false, 7), 21.0);
        assert_eq!(
            citation_weighted_recency(3.0, 2.0, true, false, 5),
            citation_weighted_recency(2.0, 3.0, false, true, 5)
        );
    }

    #[test]
    fn preferential_attachment_degree_product() {
        let mut snap = YearlySnapshot::new(2000);
        for n in [1, 2, 3] {
            snap.add_edge(KeywordId(0), KeywordId(n));
        }
        for n in [1, 2, 3, 4] {
            snap.add_edge(KeywordId(9), KeywordId(n));
        }
        assert_eq!(preferential_attachment(&snap, KeywordId(0), KeywordId(9)), 12);
        snap.add_node(KeywordId(50));
        assert_eq!(preferential_attachment(&snap, KeywordId(0), KeywordId(50)), 0);
    }

    #[test]
    fn citation_relative_self_max_and_absent() {
        let corpus = corpus_from(&[
            line("a1", 2000, &["x"], 5),
            line("a2", 2001, &["x", "y"], 4),
            line("a3", 2001, &["y"], 8),
        ]);
        let rel2000 = citation_relative(&corpus, 2000);
        let x = KeywordId(corpus.keywords.get("x").unwrap());
        let y = KeywordId(corpus.keywords.get("y").unwrap());
        assert_eq!(rel2000.get(&x), Some(&1.0));
        assert_eq!(rel2000.get(&y), None);
        let rel2001 = citation_relative(&corpus, 2001);
        assert_eq!(rel2001.get(&y), Some(&1.0)); // y: 12 citations, max
        assert!((rel2001[&x] - 4.0 / 12.0).abs() < 1e-15);
    }

    /// Nine keywords present in every year via single-keyword articles (no
    /// training edges), with two new pairs appearing in the test year.
    fn instance_corpus() -> Corpus {
        let mut lines = Vec::new();
        let kws: Vec<String> = (0..9).map(|i| format!("k{i}")).collect();
        for year in [2001, 2002, 2003] {
            for (i, k) in kws.iter().enumerate() {
                lines.push(line(&format!("s{year}_{i}"), year, &[k.as_str()], 1));
            }
        }
        // Training edge k0-k2 in 2002, repeated in the test year.
        lines.push(line("e1", 2002, &["k0", "k2"], 2));
        lines.push(line("e2", 2003, &["k0", "k2"], 2));
        // Two genuinely new test-year pairs.
        lines.push(line("e3", 2003, &["k0", "k1"], 3));
        lines.push(line("e4", 2003, &["k2", "k3"], 1));
        corpus_from(&lines)
    }

    #[test]
    fn build_instances_ratio_and_positive_set() {
        let corpus = instance_corpus();
        let kcn = build_temporal_kcn(&corpus);
        let ctx = FeatureContext::build(
            &corpus,
            &kcn,
            vec![2001, 2002],
            2003,
            &FeatureParams::default(),
        )
        .unwrap();
        let set = build_instances(&ctx, 10, 7).unwrap();
        let positives: Vec<_> = set.instances.iter().filter(|i| i.label).collect();
        let negatives: Vec<_> = set.instances.iter().filter(|i| !i.label).collect();
        assert_eq!(positives.len(), 2);
        assert_eq!(negatives.len(), 20);

        // Positive set equals the set-algebra oracle.
        let k = |name: &str| KeywordId(corpus.keywords.get(name).unwrap());
        let expected: BTreeSet<(KeywordId, KeywordId)> = [
            normalized_pair(k("k0"), k("k1")),
            normalized_pair(k("k2"), k("k3")),
        ]
        .into_iter()
        .collect();
        let got: BTreeSet<(KeywordId, KeywordId)> =
            positives.iter().map(|i| i.pair).collect();
        assert_eq!(got, expected);

        // The training-connected pair is in neither class.
        let excluded = normalized_pair(k("k0"), k("k2"));
        assert!(set.instances.iter().all(|i| i.pair != excluded));

        // Non-connected invariant: no instance pair in any training snapshot.
        for inst in &set.instances {
            for &year in &[2001, 2002] {
                assert!(!kcn.snapshot(year).unwrap().has_edge(inst.pair.0, inst.pair.1));
            }
        }

        // Series shape and normalization range.
        for inst in &set.instances {
            assert_eq!(inst.series.len(), 2);
            for v in &inst.series {
                assert_eq!(v.len(), set.dim());
                assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }
    }

    #[test]
    fn negative_shortfall_is_reported() {
        let corpus = instance_corpus();
        let kcn = build_temporal_kcn(&corpus);
        let ctx = FeatureContext::build(
            &corpus,
            &kcn,
            vec![2001, 2002],
            2003,
            &FeatureParams::default(),
        )
        .unwrap();
        // 33 eligible negatives exist; ratio 20 asks for 40.
        match build_instances(&ctx, 20, 7) {
            Err(CoreError::NegativeShortfall {
                requested,
                available,
            }) => {
                assert_eq!(requested, 40);
                assert_eq!(available, 33);
            }
            other => panic!("expected shortfall, got {other:?}"),
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let corpus = instance_corpus();
        let kcn = build_temporal_kcn(&corpus);
        let ctx = FeatureContext::build(
            &corpus,
            &kcn,
            vec![2001, 2002],
            2003,
            &FeatureParams::default(),
        )
        .unwrap();
        let s1 = build_instances(&ctx, 10, 42).unwrap();
        let s2 = build_instances(&ctx, 10, 42).unwrap();
        let s3 = build_instances(&ctx, 10, 43).unwrap();
        let pairs = |s: &InstanceSet| s.instances.iter().map(|i| i.pair).collect::<Vec<_>>();
        assert_eq!(pairs(&s1), pairs(&s2));
        assert_ne!(pairs(&s1), pairs(&s3));
    }

    #[test]
    fn instance_csv_round_trips() {
        let corpus = instance_corpus();
        let kcn = build_temporal_kcn(&corpus);
        let ctx = FeatureContext::build(
            &corpus,
            &kcn,
            vec![2001, 2002],
            2003,
            &FeatureParams::default(),
        )
        .unwrap();
        let set = build_instances(&ctx, 10, 7).unwrap();
        let mut buf = Vec::new();
        set.write_instances_csv(&corpus, &mut buf).unwrap();
        let parsed =
            InstanceSet::read_long_csv(Cursor::new(buf), &corpus, &set.layout).unwrap();
        assert_eq!(parsed.len(), set.instances.len());
        for (inst, (a, b, label, years)) in set.instances.iter().zip(&parsed) {
            assert_eq!(inst.pair, (*a, *b));
            assert_eq!(inst.label, *label);
            for (i, &year) in set.train_years.iter().enumerate() {
                let parsed_vec = &years[&year];
                for (d, &v) in inst.series[i].iter().enumerate() {
                    assert!((parsed_vec[d] - v).abs() <= 1e-11 * v.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn feature_set_projections_are_consistent() {
        let layout = FeatureLayout::standard();
        assert_eq!(layout.dim(), 39);
        for name in FEATURE_SET_NAMES {
            let spec = FeatureSetSpec::by_name(&layout, name).unwrap();
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            for &d in &spec.dims {
                assert!(d < layout.dim());
                assert!(seen.insert(d), "duplicate dim in {name}");
            }
            // numeric and block indices partition the projection.
            let mut covered: BTreeSet<usize> = spec.numeric.iter().copied().collect();
            for block in &spec.blocks {
                assert_eq!(block.len(), 4);
                covered.extend(block.iter().copied());
            }
            assert_eq!(covered.len(), spec.dims.len(), "gap in {name}");
        }
        let h_au = FeatureSetSpec::by_name(&layout, "h_au").unwrap();
        assert_eq!(h_au.dims.len(), 11);
        let all = FeatureSetSpec::by_name(&layout, "all").unwrap();
        assert_eq!(all.dims.len(), 39);
        assert_eq!(all.blocks.len(), 6);
    }
}
