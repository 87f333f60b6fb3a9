//! Pipeline configuration: a flat key = value text file with typed parsing,
//! defaults mirroring the experimental constants, and a deterministic echo
//! used by the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kcn_core::genealogy::CommunityScores;

use crate::StageError;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Line-delimited corpus records; defaults to `<output_dir>/corpus.jsonl`.
    pub corpus_path: Option<PathBuf>,
    /// Optional keyword normalization rules file (JSON).
    pub rules_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Training year range; inferred from the corpus when absent
    /// (second year through second-to-last, the first year bootstraps the
    /// genealogy and the last year is the test year).
    pub train_years: Option<(i32, i32)>,
    pub test_year: Option<i32>,
    pub min_article_count: usize,
    pub top_n: usize,
    pub n_iters: usize,
    pub community_scores: CommunityScores,
    pub neg_ratio: usize,
    pub holdout_fraction: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// 0 trains full-batch.
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub threshold: f64,
    pub rng_seed: u64,
    pub feature_sets: Vec<String>,
    /// Synthetic generator knobs (used by the synth subcommand).
    pub synth_first_year: i32,
    pub synth_years: usize,
    pub synth_articles_per_year: usize,
    pub synth_keyword_pool: usize,
    pub synth_authors: usize,
    pub synth_keywords_min: usize,
    pub synth_keywords_max: usize,
    pub synth_pa_strength: f64,
    pub synth_citation_decay: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_path: None,
            rules_path: None,
            output_dir: PathBuf::from("out"),
            train_years: None,
            test_year: None,
            min_article_count: 2,
            top_n: 20,
            n_iters: 20,
            community_scores: CommunityScores::default(),
            neg_ratio: 10,
            holdout_fraction: 0.30,
            epochs: 500,
            learning_rate: 1e-3,
            batch_size: 0,
            // Desk-scale default sized for the end-to-end time budget; the
            // richer per-layer width stays available through the config.
            hidden: vec![8, 8],
            threshold: 0.5,
            rng_seed: 0,
            feature_sets: vec![
                "h_au".into(),
                "h_at".into(),
                "h_d".into(),
                "w".into(),
                "pa".into(),
            ],
            synth_first_year: 2000,
            synth_years: 8,
            synth_articles_per_year: 150,
            synth_keyword_pool: 400,
            synth_authors: 120,
            synth_keywords_min: 3,
            synth_keywords_max: 6,
            synth_pa_strength: 1.5,
            synth_citation_decay: 0.8,
        }
    }
}

fn usage_err(msg: impl Into<String>) -> StageError {
    StageError::Usage(msg.into())
}

impl PipelineConfig {
    /// Parses a flat key = value file over the defaults. Lines starting
    /// with `#` and blank lines are skipped; unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<Self, StageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage_err(format!("config {}: {e}", path.display())))?;
        let mut cfg = PipelineConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage_err(format!("config line {}: expected key = value", idx + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| usage_err(format!("config line {}: {e}", idx + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| format!("{key}: {e}"));
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| format!("{key}: {e}"));
        let parse_i32 = |v: &str| v.parse::<i32>().map_err(|e| format!("{key}: {e}"));
        match key {
            "corpus_path" => self.corpus_path = Some(PathBuf::from(value)),
            "rules_path" => self.rules_path = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "first_train_year" => {
                let last = self.train_years.map(|(_, l)| l).unwrap_or(i32::MIN);
                self.train_years = Some((parse_i32(value)?, last));
            }
            "last_train_year" => {
                let first = self.train_years.map(|(f, _)| f).unwrap_or(i32::MIN);
                self.train_years = Some((first, parse_i32(value)?));
            }
            "test_year" => self.test_year = Some(parse_i32(value)?),
            "min_article_count" => self.min_article_count = parse_usize(value)?,
            "top_n" => self.top_n = parse_usize(value)?,
            "n_iters" => self.n_iters = parse_usize(value)?,
            "community_scores" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("community_scores: {e}"))?;
                if parts.len() != 4 {
                    return Err("community_scores: expected four comma-separated reals".into());
                }
                self.community_scores = CommunityScores {
                    gp: parts[0],
                    p: parts[1],
                    c: parts[2],
                    g: parts[3],
                };
            }
            "neg_ratio" => self.neg_ratio = parse_usize(value)?,
            "holdout_fraction" => self.holdout_fraction = parse_f64(value)?,
            "epochs" => self.epochs = parse_usize(value)?,
            "learning_rate" => self.learning_rate = parse_f64(value)?,
            "batch_size" => self.batch_size = parse_usize(value)?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("hidden: {e}"))?;
            }
            "threshold" => self.threshold = parse_f64(value)?,
            "rng_seed" => {
                self.rng_seed = value.parse::<u64>().map_err(|e| format!("rng_seed: {e}"))?;
            }
            "feature_sets" => {
                self.feature_sets = value.split(',').map(|p| p.trim().to_string()).collect();
            }
            "synth_first_year" => self.synth_first_year = parse_i32(value)?,
            "synth_years" => self.synth_years = parse_usize(value)?,
            "synth_articles_per_year" => self.synth_articles_per_year = parse_usize(value)?,
            "synth_keyword_pool" => self.synth_keyword_pool = parse_usize(value)?,
            "synth_authors" => self.synth_authors = parse_usize(value)?,
            "synth_keywords_min" => self.synth_keywords_min = parse_usize(value)?,
            "synth_keywords_max" => self.synth_keywords_max = parse_usize(value)?,
            "synth_pa_strength" => self.synth_pa_strength = parse_f64(value)?,
            "synth_citation_decay" => self.synth_citation_decay = parse_f64(value)?,
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), StageError> {
        if let (Some((first, last)), Some(test)) = (self.train_years, self.test_year) {
            if first != i32::MIN && last != i32::MIN {
                if first > last {
                    return Err(usage_err("train year range is reversed"));
                }
                if test != last + 1 {
                    return Err(usage_err(format!(
                        "test_year must equal last_train_year + 1 (got {test} after {last})"
                    )));
                }
            }
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction <= 0.5) {
            return Err(usage_err("holdout_fraction must lie in (0, 0.5]"));
        }
        if self.neg_ratio < 1 {
            return Err(usage_err("neg_ratio must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(usage_err("epochs must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return Err(usage_err("hidden must list positive layer widths"));
        }
        if self.feature_sets.is_empty() {
            return Err(usage_err("feature_sets must not be empty"));
        }
        for name in &self.feature_sets {
            let known = ["h_au", "h_at", "h_d", "w", "pa", "all"];
            if !known.contains(&name.as_str()) {
                return Err(usage_err(format!("unknown feature set {name:?}")));
            }
        }
        Ok(())
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.corpus_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("corpus.jsonl"))
    }

    /// Deterministic key = value echo recorded in the manifest; every value
    /// is resolved, so the echo alone reproduces the run.
    pub fn echo(&self) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("corpus_path", self.corpus_path().display().to_string());
        if let Some(p) = &self.rules_path {
            map.insert("rules_path", p.display().to_string());
        }
        map.insert("output_dir", self.output_dir.display().to_string());
        if let Some((f, l)) = self.train_years {
            map.insert("first_train_year", f.to_string());
            map.insert("last_train_year", l.to_string());
        }
        if let Some(t) = self.test_year {
            map.insert("test_year", t.to_string());
        }
        map.insert("min_article_count", self.min_article_count.to_string());
        map.insert("top_n", self.top_n.to_string());
        map.insert("n_iters", self.n_iters.to_string());
        map.insert(
            "community_scores",
            format!(
                "{},{},{},{}",
                self.community_scores.gp,
                self.community_scores.p,
                self.community_scores.c,
                self.community_scores.g
            ),
        );
        map.insert("neg_ratio", self.neg_ratio.to_string());
        map.insert("holdout_fraction", self.holdout_fraction.to_string());
        map.insert("epochs", self.epochs.to_string());
        map.insert("learning_rate", self.learning_rate.to_string());
        map.insert("batch_size", self.batch_size.to_string());
        map.insert(
            "hidden",
            self.hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert("threshold", self.threshold.to_string());
        map.insert("rng_seed", self.rng_seed.to_string());
        map.insert("feature_sets", self.feature_sets.join(","));
        map.insert("synth_first_year", self.synth_first_year.to_string());
        map.insert("synth_years", self.synth_years.to_string());
        map.insert(
            "synth_articles_per_year",
            self.synth_articles_per_year.to_string(),
        );
        map.insert("synth_keyword_pool", self.synth_keyword_pool.to_string());
        map.insert("synth_authors", self.synth_authors.to_string());
        map.insert("synth_keywords_min", self.synth_keywords_min.to_string());
        map.insert("synth_keywords_max", self.synth_keywords_max.to_string());
        map.insert("synth_pa_strength", self.synth_pa_strength.to_string());
        map.insert(
            "synth_citation_decay",
            self.synth_citation_decay.to_string(),
        );
        let mut out = String::new();
        for (k, v) in map {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
