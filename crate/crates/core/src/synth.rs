//! Seeded synthetic scholarly corpora with planted structure so every
//! pipeline stage has a reproducible desk-scale input.
//!
//! The generator plants the dynamics the pipeline is meant to detect:
//!
//! - **Persistent hubs.** A small hub set gets a sampling head start and one
//!   guaranteed appearance per year, so representative keywords persist.
//! - **Topical clustering.** Each article has a latent topic hub; keywords
//!   already co-occurring with that hub get a sampling affinity boost, and
//!   the article's authors are drawn from the topic's specialist block.
//! - **Author-driven attachment.** Sampling weights grow with the number of
//!   distinct authors who used a keyword (raised to `pa_strength`), so
//!   attachment propensity lives in the keyword-author bipartite structure.
//! - **Emerging keywords.** A few keywords are consumed quietly by one
//!   topic's author community during the middle years (broad authorship,
//!   few co-occurrences) and then burst into their cluster in the final
//!   year: the signature that community-aware features can anticipate and
//!   plain degree products cannot.
//!
//! Citation counts decay geometrically with recency: older articles have
//! accumulated more citations.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::Year;

/// Number of planted hub keywords (the first entries of the pool).
pub const HUB_COUNT: usize = 10;
/// Head start given to hubs in the sampling weights.
const HUB_HEAD_START: f64 = 50.0;
/// Mean citation count of a first-year article.
const CITATION_BASE_MEAN: f64 = 25.0;
/// Probability that an author slot is filled from the specialty block of
/// the article's topic hub.
const SPECIALTY_BIAS: f64 = 0.97;
/// Probability that a keyword slot explores uniformly instead of following
/// the preferential weights; keeps the long tail of the pool alive.
const EXPLORATION: f64 = 0.12;
/// Probability that an organic article mentions its topic hub outright.
const TOPIC_MENTION: f64 = 0.6;
/// Multiplier on the sampling weight of keywords already co-occurring with
/// the article's topic hub.
const TOPIC_AFFINITY: f64 = 4.0;
/// Damping applied to hubs outside the article's topic; keeps communities
/// separated enough that the recursive centrality retains contrast.
const CROSS_HUB_DAMP: f64 = 0.15;
/// Zipf exponent for topic popularity: research fields differ in size, and
/// that heterogeneity is what the recursive centrality measures.
const TOPIC_ZIPF: f64 = 1.0;
/// Reference attachment strength: the affinity and damping factors apply at
/// full force here and roll off to 1 as pa_strength approaches 0, so the
/// zero-strength sampler is genuinely uniform.
const REFERENCE_PA_STRENGTH: f64 = 1.5;
/// Cap on the number of emerging keywords.
const EMERGENT_MAX: usize = 12;
/// Quiet-phase articles per emerging keyword per middle year.
const QUIET_PER_YEAR: usize = 2;
/// Final-year burst articles per emerging keyword.
const BURST_PER_EMERGENT: usize = 4;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub rng_seed: u64,
    pub first_year: Year,
    pub years: usize,
    pub articles_per_year: usize,
    pub keyword_pool: usize,
    pub authors: usize,
    /// Inclusive keyword-count range per article.
    pub keywords_per_article: (usize, usize),
    /// Exponent on the attachment weights; 0 gives uniform sampling.
    pub pa_strength: f64,
    /// Geometric decay of mean citations per year of recency, in (0, 1].
    pub citation_decay: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rng_seed: 0,
            first_year: 2000,
            years: 8,
            articles_per_year: 150,
            keyword_pool: 400,
            authors: 120,
            keywords_per_article: (3, 6),
            pa_strength: 1.5,
            citation_decay: 0.8,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), String> {
        if self.years == 0
            || self.articles_per_year == 0
            || self.keyword_pool == 0
            || self.authors == 0
        {
            return Err("all counts must be positive".into());
        }
        if self.keywords_per_article.0 < 1
            || self.keywords_per_article.0 > self.keywords_per_article.1
        {
            return Err("keywords_per_article range is invalid".into());
        }
        if self.keywords_per_article.1 > self.keyword_pool {
            return Err("keywords_per_article exceeds the keyword pool".into());
        }
        if self.pa_strength < 0.0 {
            return Err("pa_strength must be >= 0".into());
        }
        if !(self.citation_decay > 0.0 && self.citation_decay <= 1.0) {
            return Err("citation_decay must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// Counts the generator reports about its own output; ingest recounts them.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SynthReport {
    pub articles: usize,
    pub distinct_keywords: usize,
    pub distinct_authors: usize,
    pub articles_per_year: Vec<(Year, usize)>,
}

impl SynthReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "articles:          {}", self.articles);
        let _ = writeln!(s, "distinct keywords: {}", self.distinct_keywords);
        let _ = writeln!(s, "distinct authors:  {}", self.distinct_authors);
        for (year, n) in &self.articles_per_year {
            let _ = writeln!(s, "articles in {year}: {n}");
        }
        s
    }
}

#[derive(Serialize)]
struct OutRecord {
    id: String,
    year: Year,
    authors: Vec<String>,
    keywords: Vec<String>,
    citations: u32,
}

/// What a given article slot is planted to do.
#[derive(Clone, Copy)]
enum ArticleKind {
    /// Guaranteed yearly appearance of one hub.
    HubPlant(usize),
    /// Quiet consumption of an emerging keyword by its topic community.
    Quiet(usize),
    /// Final-year burst of an emerging keyword into its cluster.
    Burst(usize),
    Organic,
}

/// Generates the corpus as line-delimited JSON text. Output is byte-stable
/// for a fixed config.
pub fn generate(cfg: &SynthConfig) -> Result<(String, SynthReport), String> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let pool = cfg.keyword_pool;
    let hubs = HUB_COUNT.min(pool);
    let author_block = (cfg.authors / hubs).max(1);

    let keyword_names: Vec<String> = (0..pool).map(|i| format!("kw{i:03}")).collect();
    let author_names: Vec<String> = (0..cfg.authors).map(|i| format!("author {i:03}")).collect();

    // Emerging keywords: drawn from the non-hub pool, each tied to a topic.
    let planted_capacity = cfg
        .articles_per_year
        .saturating_sub(hubs)
        / QUIET_PER_YEAR.max(BURST_PER_EMERGENT);
    // Emergence is planted structure; a zero-strength corpus has none.
    let emergent_count = if cfg.years >= 4 && pool > hubs && cfg.pa_strength > 0.0 {
        EMERGENT_MAX.min(planted_capacity).min((pool - hubs) / 4)
    } else {
        0
    };
    let mut emergent: Vec<usize> = Vec::new();
    while emergent.len() < emergent_count {
        let k = rng.random_range(hubs..pool);
        if !emergent.contains(&k) {
            emergent.push(k);
        }
    }
    // Zipf-weighted topic popularity.
    let topic_weights: Vec<f64> = (0..hubs)
        .map(|h| 1.0 / ((h + 1) as f64).powf(TOPIC_ZIPF))
        .collect();

    let emergent_topic: Vec<usize> = (0..emergent_count)
        .map(|_| sample_weighted_rng(&topic_weights, &mut rng))
        .collect();
    let mut emergent_rotation = vec![0usize; emergent_count];

    // Attachment follows author consumption: the sampling weight of a
    // keyword grows with the number of distinct authors who used it, so the
    // planted dynamics are visible to the keyword-author bipartite view.
    let mut author_breadth = vec![0.0f64; pool];
    let mut consumed: BTreeSet<(usize, usize)> = BTreeSet::new(); // (keyword, author)
    let mut edge_seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut hub_neighbors: Vec<Vec<bool>> = vec![vec![false; pool]; hubs];
    let mut weights = vec![0.0f64; pool];

    let mut out = String::new();
    let mut report = SynthReport::default();
    let mut used_keywords: BTreeSet<usize> = BTreeSet::new();
    let mut used_authors: BTreeSet<usize> = BTreeSet::new();

    for year_idx in 0..cfg.years {
        let year = cfg.first_year + year_idx as Year;
        let citation_mean = CITATION_BASE_MEAN * cfg.citation_decay.powi(year_idx as i32);
        let quiet_year = year_idx >= 1 && year_idx + 1 < cfg.years;
        let burst_year = year_idx + 1 == cfg.years;
        for article_idx in 0..cfg.articles_per_year {
            let kind = if article_idx < hubs {
                ArticleKind::HubPlant(article_idx)
            } else if quiet_year && article_idx - hubs < emergent_count * QUIET_PER_YEAR {
                ArticleKind::Quiet((article_idx - hubs) / QUIET_PER_YEAR)
            } else if burst_year && article_idx - hubs < emergent_count * BURST_PER_EMERGENT {
                ArticleKind::Burst((article_idx - hubs) / BURST_PER_EMERGENT)
            } else {
                ArticleKind::Organic
            };

            let topic_hub = match kind {
                ArticleKind::HubPlant(h) => h,
                ArticleKind::Quiet(e) | ArticleKind::Burst(e) => emergent_topic[e],
                ArticleKind::Organic => sample_weighted_rng(&topic_weights, &mut rng),
            };

            // Quiet articles stay at the minimum length so the emerging
            // keyword accumulates authors faster than co-occurrences.
            let n_kw = match kind {
                ArticleKind::Quiet(_) => cfg.keywords_per_article.0,
                _ => rng.random_range(cfg.keywords_per_article.0..=cfg.keywords_per_article.1),
            };

            let mut chosen: BTreeSet<usize> = BTreeSet::new();
            match kind {
                ArticleKind::HubPlant(h) => {
                    chosen.insert(h);
                }
                ArticleKind::Quiet(e) => {
                    chosen.insert(emergent[e]);
                    if n_kw >= 2 {
                        chosen.insert(topic_hub);
                    }
                }
                ArticleKind::Burst(e) => {
                    chosen.insert(emergent[e]);
                }
                ArticleKind::Organic => {
                    let mention = TOPIC_MENTION * (cfg.pa_strength / REFERENCE_PA_STRENGTH).min(1.0);
                    if rng.random::<f64>() < mention {
                        chosen.insert(topic_hub);
                    }
                }
            }

            let structure = cfg.pa_strength / REFERENCE_PA_STRENGTH;
            for (k, w) in weights.iter_mut().enumerate() {
                let head_start = if k < hubs { HUB_HEAD_START } else { 0.0 };
                let affinity = if k < hubs && k != topic_hub {
                    CROSS_HUB_DAMP
                } else if hub_neighbors[topic_hub][k] {
                    1.0 + TOPIC_AFFINITY
                } else {
                    1.0
                };
                *w = (author_breadth[k] + head_start + 1.0).powf(cfg.pa_strength)
                    * affinity.powf(structure);
            }
            while chosen.len() < n_kw {
                let k = if rng.random::<f64>() < EXPLORATION {
                    rng.random_range(0..pool)
                } else {
                    sample_weighted(&weights, &mut rng)
                };
                chosen.insert(k);
            }

            // Authors come from the topic's specialist block; quiet articles
            // rotate through it so the emerging keyword's author breadth
            // grows steadily.
            let mut article_authors: BTreeSet<usize> = BTreeSet::new();
            match kind {
                ArticleKind::Quiet(e) if cfg.authors >= hubs => {
                    let start = topic_hub * author_block;
                    article_authors.insert(start + emergent_rotation[e] % author_block);
                    emergent_rotation[e] += 1;
                    article_authors.insert(start + emergent_rotation[e] % author_block);
                    emergent_rotation[e] += 1;
                    article_authors.insert(start + rng.random_range(0..author_block));
                }
                _ => {
                    let n_authors = rng.random_range(1..=3.min(cfg.authors));
                    while article_authors.len() < n_authors {
                        let author =
                            if cfg.authors >= hubs && rng.random::<f64>() < SPECIALTY_BIAS {
                                topic_hub * author_block + rng.random_range(0..author_block)
                            } else {
                                rng.random_range(0..cfg.authors)
                            };
                        article_authors.insert(author);
                    }
                }
            }

            // Exponential citations with recency-decayed mean.
            let u: f64 = rng.random();
            let citations = (-citation_mean * (1.0 - u).ln()).floor() as u32;

            let kw_list: Vec<usize> = chosen.iter().copied().collect();
            for (i, &a) in kw_list.iter().enumerate() {
                for &b in &kw_list[i + 1..] {
                    if edge_seen.insert((a, b)) {
                        if a < hubs {
                            hub_neighbors[a][b] = true;
                        }
                        if b < hubs {
                            hub_neighbors[b][a] = true;
                        }
                    }
                }
            }
            for &k in &kw_list {
                for &a in &article_authors {
                    if consumed.insert((k, a)) {
                        author_breadth[k] += 1.0;
                    }
                }
            }
            used_keywords.extend(kw_list.iter().copied());
            used_authors.extend(article_authors.iter().copied());

            let record = OutRecord {
                id: format!("a{year}_{article_idx:04}"),
                year,
                authors: article_authors
                    .iter()
                    .map(|&a| author_names[a].clone())
                    .collect(),
                keywords: kw_list.iter().map(|&k| keyword_names[k].clone()).collect(),
                citations,
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&record).unwrap());
        }
        report
            .articles_per_year
            .push((year, cfg.articles_per_year));
    }

    report.articles = cfg.years * cfg.articles_per_year;
    report.distinct_keywords = used_keywords.len();
    report.distinct_authors = used_authors.len();
    Ok((out, report))
}

/// Generates and writes the corpus file; returns the self-report.
pub fn generate_to_file(cfg: &SynthConfig, path: &Path) -> Result<SynthReport, String> {
    let (text, report) = generate(cfg)?;
    std::fs::write(path, text).map_err(|e| format!("write {}: {e}", path.display()))?;
    Ok(report)
}

fn sample_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    sample_weighted_rng(weights, rng)
}

fn sample_weighted_rng(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        target -= w;
        if target < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}
