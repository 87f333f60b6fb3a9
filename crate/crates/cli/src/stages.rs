//! Pipeline stages. Every stage reads its inputs from the output directory
//! (or the corpus path), writes its artifacts, and rewrites the manifest, so
//! chaining the subcommands is byte-identical to running the monolithic
//! pipeline.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use kcn_core::centrality::{centrality_table, centrality_csv, convergence_report, CentralityTable, Variant};
use kcn_core::corpus::{
    evolution_csv, ingest, yearly_evolution_stats, Corpus, IngestOptions, IngestReport,
    NormalizationRules,
};
use kcn_core::eval::{accuracy_at, normalized_rmse, pr_curve, roc_auc, EvalReport};
use kcn_core::features::{
    build_instances, FeatureContext, FeatureLayout, FeatureParams, FeatureSetSpec, InstanceSet,
};
use kcn_core::genealogy::{
    assign_communities, communities_csv, top_n_central, typed_edge_stats, typed_edges_csv,
    CommunityAssignment,
};
use kcn_core::kcn::{build_temporal_kcn, edges_csv, build_bipartite, BipartiteMode, TemporalKcn};
use kcn_core::synth::{generate, SynthConfig};
use kcn_core::{fmt_real, CoreError, KeywordId, Year};
use kcn_neural::{
    forecast, train_classifier, train_forecaster, ForecastHead, LstmNet, TrainConfig, TrainTrace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::manifest::update_manifest;
use crate::{mix_seed, StageError};

// Artifact file names.
pub const SYNTH_REPORT: &str = "synth_report.txt";
pub const INGEST_REPORT: &str = "ingest_report.txt";
pub const EVOLUTION_CSV: &str = "evolution.csv";
pub const KCN_EDGES_CSV: &str = "kcn_edges.csv";
pub const CENTRALITY_CSV: &str = "centrality.csv";
pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const COMMUNITIES_CSV: &str = "communities.csv";
pub const TYPED_EDGES_CSV: &str = "typed_edges.csv";
pub const INSTANCES_CSV: &str = "instances.csv";
pub const TEST_ACTUALS_CSV: &str = "test_actuals.csv";
pub const SPLIT_CSV: &str = "split.csv";
pub const DENSITIES_CSV: &str = "densities.csv";
pub const FORECASTS_CSV: &str = "forecasts.csv";
pub const FORECAST_LOSSES_CSV: &str = "forecast_losses.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const CLASSIFIER_LOSSES_CSV: &str = "classifier_losses.csv";
pub const FAILED_MARKER: &str = "FAILED";

const DENSITY_BINS: usize = 40;

fn require_file(path: &Path) -> Result<(), StageError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(StageError::Data(format!(
            "missing upstream artifact: expected {}",
            path.display()
        )))
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), StageError> {
    std::fs::write(path, text).map_err(|e| StageError::Data(format!("{}: {e}", path.display())))
}

fn out_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn load_rules(cfg: &PipelineConfig) -> Result<NormalizationRules, StageError> {
    match &cfg.rules_path {
        Some(path) => Ok(NormalizationRules::from_path(path)?),
        None => Ok(NormalizationRules::builtin()),
    }
}

fn load_corpus(cfg: &PipelineConfig) -> Result<(Corpus, IngestReport), StageError> {
    let path = cfg.corpus_path();
    require_file(&path)?;
    let rules = load_rules(cfg)?;
    let opts = IngestOptions {
        min_article_count: cfg.min_article_count,
        year_range: None,
    };
    Ok(ingest(&path, &rules, &opts)?)
}

/// Training years and test year, from the config or inferred from the
/// corpus range (first year bootstraps the genealogy, last year tests).
fn resolve_years(cfg: &PipelineConfig, corpus: &Corpus) -> Result<(Vec<Year>, Year), StageError> {
    let (first, last) = corpus.year_range;
    let (train_first, train_last, test_year) = match (cfg.train_years, cfg.test_year) {
        (Some((f, l)), _) if f == i32::MIN || l == i32::MIN => {
            return Err(StageError::Usage(
                "both first_train_year and last_train_year must be set".into(),
            ));
        }
        (Some((f, l)), Some(t)) => (f, l, t),
        (Some((f, l)), None) => (f, l, l + 1),
        (None, Some(t)) => (first + 1, t - 1, t),
        (None, None) => {
            if last - first < 2 {
                return Err(StageError::Data(format!(
                    "corpus covers {first}..={last}; at least three years are needed \
                     (bootstrap, training, test)"
                )));
            }
            (first + 1, last - 1, last)
        }
    };
    if train_first > train_last {
        return Err(StageError::Usage("training year range is empty".into()));
    }
    if test_year != train_last + 1 {
        return Err(StageError::Usage(
            "test_year must equal last_train_year + 1".into(),
        ));
    }
    if train_first < first || test_year > last {
        return Err(StageError::Data(format!(
            "configured years {train_first}..={test_year} exceed the corpus range {first}..={last}"
        )));
    }
    if train_last - train_first < 1 {
        return Err(StageError::Data(
            "at least two training years are required to fit a forecaster".into(),
        ));
    }
    Ok(((train_first..=train_last).collect(), test_year))
}

fn train_config(cfg: &PipelineConfig, stream: u64) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        batch_size: if cfg.batch_size == 0 {
            None
        } else {
            Some(cfg.batch_size)
        },
        rng_seed: mix_seed(cfg.rng_seed, stream),
        ..TrainConfig::default()
    }
}

fn feature_params(cfg: &PipelineConfig) -> FeatureParams {
    FeatureParams {
        top_n: cfg.top_n,
        n_iters: cfg.n_iters,
        community_scores: cfg.community_scores,
    }
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Generates the synthetic corpus into the corpus path.
pub fn stage_synth(cfg: &PipelineConfig) -> Result<(), StageError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let synth_cfg = SynthConfig {
        rng_seed: cfg.rng_seed,
        first_year: cfg.synth_first_year,
        years: cfg.synth_years,
        articles_per_year: cfg.synth_articles_per_year,
        keyword_pool: cfg.synth_keyword_pool,
        authors: cfg.synth_authors,
        keywords_per_article: (cfg.synth_keywords_min, cfg.synth_keywords_max),
        pa_strength: cfg.synth_pa_strength,
        citation_decay: cfg.synth_citation_decay,
    };
    let (text, report) = generate(&synth_cfg).map_err(StageError::Data)?;
    let corpus_path = cfg.corpus_path();
    if let Some(parent) = corpus_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_text(&corpus_path, &text)?;
    write_text(&out_path(cfg, SYNTH_REPORT), &report.summary())?;
    update_manifest(cfg)?;
    Ok(())
}

/// Ingests the corpus and writes the report plus evolution statistics.
pub fn stage_ingest(cfg: &PipelineConfig) -> Result<(), StageError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let (corpus, report) = load_corpus(cfg)?;
    let kcn = build_temporal_kcn(&corpus);
    let rows = yearly_evolution_stats(&corpus, &kcn)?;
    write_text(&out_path(cfg, INGEST_REPORT), &report.summary())?;
    write_text(&out_path(cfg, EVOLUTION_CSV), &evolution_csv(&rows))?;
    update_manifest(cfg)?;
    Ok(())
}

/// Dumps the per-year edge lists.
pub fn stage_build_kcn(cfg: &PipelineConfig) -> Result<(), StageError> {
    require_file(&out_path(cfg, INGEST_REPORT))?;
    let (corpus, _) = load_corpus(cfg)?;
    let kcn = build_temporal_kcn(&corpus);
    write_text(&out_path(cfg, KCN_EDGES_CSV), &edges_csv(&kcn, &corpus))?;
    update_manifest(cfg)?;
    Ok(())
}

fn all_tables(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    kcn: &TemporalKcn,
    train_years: &[Year],
    test_year: Year,
) -> Result<Vec<CentralityTable>, StageError> {
    let bootstrap = train_years[0] - 1;
    let first = if corpus.contains_year(bootstrap) {
        bootstrap
    } else {
        train_years[0]
    };
    let mut tables = Vec::new();
    for year in first..=test_year {
        for variant in Variant::ALL {
            tables.push(centrality_table(kcn, corpus, year, variant, cfg.n_iters)?);
        }
    }
    Ok(tables)
}

/// Computes the three centrality variants for every relevant year; the
/// optional `convergence_n` additionally dumps per-iteration rank-swap
/// counts for the recursive variants.
pub fn stage_centrality(
    cfg: &PipelineConfig,
    convergence_n: Option<usize>,
) -> Result<(), StageError> {
    require_file(&out_path(cfg, KCN_EDGES_CSV))?;
    let (corpus, _) = load_corpus(cfg)?;
    let kcn = build_temporal_kcn(&corpus);
    let (train_years, test_year) = resolve_years(cfg, &corpus)?;
    let tables = all_tables(cfg, &corpus, &kcn, &train_years, test_year)?;
    write_text(&out_path(cfg, CENTRALITY_CSV), &centrality_csv(&tables, &corpus))?;

    if let Some(max_n) = convergence_n {
        let mut text = String::from("year,variant,n,swaps\n");
        for table in &tables {
            if table.variant == Variant::D {
                continue;
            }
            let mode = if table.variant == Variant::Au {
                BipartiteMode::KeywordAuthor
            } else {
                BipartiteMode::KeywordArticle
            };
            let incidence = build_bipartite(&corpus, table.year, mode)?;
            for row in convergence_report(&incidence, max_n)? {
                use std::fmt::Write as _;
                let _ = writeln!(
                    text,
                    "{},{},{},{}",
                    table.year,
                    table.variant.as_str(),
                    row.n,
                    row.swaps
                );
            }
        }
        write_text(&out_path(cfg, CONVERGENCE_CSV), &text)?;
    }
    update_manifest(cfg)?;
    Ok(())
}

/// Assigns genealogical communities per (year, variant) and dumps the label
/// table plus typed-edge statistics.
pub fn stage_communities(cfg: &PipelineConfig) -> Result<(), StageError> {
    require_file(&out_path(cfg, CENTRALITY_CSV))?;
    let (corpus, _) = load_corpus(cfg)?;
    let kcn = build_temporal_kcn(&corpus);
    let (train_years, test_year) = resolve_years(cfg, &corpus)?;
    let tables = all_tables(cfg, &corpus, &kcn, &train_years, test_year)?;
    let table_for = |year: Year, variant: Variant| -> Option<&CentralityTable> {
        tables
            .iter()
            .find(|t| t.year == year && t.variant == variant)
    };

    let mut assignments: Vec<CommunityAssignment> = Vec::new();
    let mut per_variant: Vec<(Variant, Vec<kcn_core::genealogy::TypedEdgeRow>)> = Vec::new();
    for variant in Variant::ALL {
        let mut by_year = std::collections::BTreeMap::new();
        for year in train_years[0]..=test_year {
            let snap = kcn
                .snapshot(year)
                .ok_or(CoreError::UnknownYear(year))
                .map_err(StageError::from)?;
            let grandparents = table_for(year - 1, variant)
                .map(|t| top_n_central(t, cfg.top_n))
                .unwrap_or_default();
            let assignment =
                assign_communities(snap, variant, &grandparents, cfg.community_scores);
            by_year.insert(year, assignment);
        }
        per_variant.push((variant, typed_edge_stats(&kcn, &by_year)?));
        assignments.extend(by_year.into_values());
    }
    let refs: Vec<&CommunityAssignment> = assignments.iter().collect();
    write_text(&out_path(cfg, COMMUNITIES_CSV), &communities_csv(&refs, &corpus))?;
    write_text(&out_path(cfg, TYPED_EDGES_CSV), &typed_edges_csv(&per_variant))?;
    update_manifest(cfg)?;
    Ok(())
}

/// Builds the labeled instance set, the stratified holdout split, and the
/// feature dumps.
pub fn stage_features(cfg: &PipelineConfig) -> Result<(), StageError> {
    require_file(&out_path(cfg, COMMUNITIES_CSV))?;
    let (corpus, _) = load_corpus(cfg)?;
    let kcn = build_temporal_kcn(&corpus);
    let (train_years, test_year) = resolve_years(cfg, &corpus)?;
    let ctx = FeatureContext::build(&corpus, &kcn, train_years, test_year, &feature_params(cfg))?;
    let set = build_instances(&ctx, cfg.neg_ratio, cfg.rng_seed)?;

    let file = File::create(out_path(cfg, INSTANCES_CSV))?;
    set.write_instances_csv(&corpus, BufWriter::new(file))?;
    let file = File::create(out_path(cfg, TEST_ACTUALS_CSV))?;
    set.write_test_actuals_csv(&corpus, BufWriter::new(file))?;
    write_text(&out_path(cfg, DENSITIES_CSV), &set.densities_csv(DENSITY_BINS))?;

    // Stratified holdout split preserving the class ratio exactly: pick
    // round(fraction * positives) positives and neg_ratio times as many
    // negatives, both by seeded partial shuffle.
    let positives: Vec<usize> = (0..set.instances.len())
        .filter(|&i| set.instances[i].label)
        .collect();
    let negatives: Vec<usize> = (0..set.instances.len())
        .filter(|&i| !set.instances[i].label)
        .collect();
    let holdout_pos = ((cfg.holdout_fraction * positives.len() as f64).round() as usize)
        .clamp(1, positives.len().saturating_sub(1).max(1));
    let holdout_neg = cfg.neg_ratio * holdout_pos;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, 2));
    let sample = |ids: &[usize], take: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        let mut pool = ids.to_vec();
        for i in 0..take.min(pool.len()) {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(take);
        pool
    };
    let mut holdout = vec![false; set.instances.len()];
    for i in sample(&positives, holdout_pos, &mut rng) {
        holdout[i] = true;
    }
    for i in sample(&negatives, holdout_neg, &mut rng) {
        holdout[i] = true;
    }

    let mut text = String::from("pair_a,pair_b,label,split\n");
    for (inst, &is_holdout) in set.instances.iter().zip(&holdout) {
        use std::fmt::Write as _;
        let _ = writeln!(
            text,
            "{},{},{},{}",
            corpus.keyword_name(inst.pair.0),
            corpus.keyword_name(inst.pair.1),
            if inst.label { "positive" } else { "negative" },
            if is_holdout { "holdout" } else { "train" }
        );
    }
    write_text(&out_path(cfg, SPLIT_CSV), &text)?;
    update_manifest(cfg)?;
    Ok(())
}

/// Instances reloaded from the persisted dumps.
struct LoadedInstances {
    pairs: Vec<(KeywordId, KeywordId)>,
    labels: Vec<bool>,
    series: Vec<Vec<Vec<f64>>>,
    years: Vec<Year>,
    holdout: Vec<bool>,
    test_actuals: Vec<Vec<f64>>,
}

fn load_instances(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    layout: &FeatureLayout,
    need_actuals: bool,
) -> Result<LoadedInstances, StageError> {
    let inst_path = out_path(cfg, INSTANCES_CSV);
    let split_path = out_path(cfg, SPLIT_CSV);
    require_file(&inst_path)?;
    require_file(&split_path)?;

    let reader = BufReader::new(File::open(&inst_path)?);
    let parsed = InstanceSet::read_long_csv(reader, corpus, layout)?;
    let years: Vec<Year> = parsed
        .first()
        .map(|(_, _, _, by_year)| by_year.keys().copied().collect())
        .unwrap_or_default();
    let mut pairs = Vec::with_capacity(parsed.len());
    let mut labels = Vec::with_capacity(parsed.len());
    let mut series = Vec::with_capacity(parsed.len());
    for (a, b, label, by_year) in parsed {
        let inst_years: Vec<Year> = by_year.keys().copied().collect();
        if inst_years != years {
            return Err(StageError::Data(format!(
                "instance dump is ragged: {:?} vs {:?}",
                inst_years, years
            )));
        }
        pairs.push((a, b));
        labels.push(label);
        series.push(by_year.into_values().collect());
    }

    let mut split_map: HashMap<(KeywordId, KeywordId), bool> = HashMap::new();
    let text = std::fs::read_to_string(&split_path)?;
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(StageError::Data(format!("split.csv line {}", idx + 1)));
        }
        let a = corpus
            .keywords
            .get(parts[0])
            .map(KeywordId)
            .ok_or_else(|| StageError::Data(format!("split.csv: unknown keyword {}", parts[0])))?;
        let b = corpus
            .keywords
            .get(parts[1])
            .map(KeywordId)
            .ok_or_else(|| StageError::Data(format!("split.csv: unknown keyword {}", parts[1])))?;
        split_map.insert((a, b), parts[3] == "holdout");
    }
    let holdout: Vec<bool> = pairs
        .iter()
        .map(|p| split_map.get(p).copied().unwrap_or(false))
        .collect();

    let test_actuals = if need_actuals {
        let path = out_path(cfg, TEST_ACTUALS_CSV);
        require_file(&path)?;
        let reader = BufReader::new(File::open(&path)?);
        let parsed = InstanceSet::read_long_csv(reader, corpus, layout)?;
        let by_pair: HashMap<(KeywordId, KeywordId), Vec<f64>> = parsed
            .into_iter()
            .map(|(a, b, _, mut by_year)| {
                let v = by_year
                    .remove(&by_year.keys().next().copied().unwrap_or_default())
                    .unwrap_or_default();
                ((a, b), v)
            })
            .collect();
        pairs
            .iter()
            .map(|p| {
                by_pair.get(p).cloned().ok_or_else(|| {
                    StageError::Data("test_actuals.csv is missing an instance".into())
                })
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };

    Ok(LoadedInstances {
        pairs,
        labels,
        series,
        years,
        holdout,
        test_actuals,
    })
}

fn set_specs(cfg: &PipelineConfig, layout: &FeatureLayout) -> Vec<FeatureSetSpec> {
    cfg.feature_sets
        .iter()
        .map(|name| FeatureSetSpec::by_name(layout, name).expect("validated set name"))
        .collect()
}

fn push_losses(text: &mut String, model: &str, trace: &TrainTrace) {
    use std::fmt::Write as _;
    for (epoch, loss) in trace.epoch_losses.iter().enumerate() {
        let _ = writeln!(text, "{model},{epoch},{}", fmt_real(*loss));
    }
}

/// Trains the per-set forecasters on the training split and writes the
/// forecasted test-year vector for every instance.
pub fn stage_forecast(cfg: &PipelineConfig) -> Result<(), StageError> {
    let (corpus, _) = load_corpus(cfg)?;
    let layout = FeatureLayout::standard();
    let inst = load_instances(cfg, &corpus, &layout, false)?;
    let t_len = inst.years.len();
    if t_len < 2 {
        return Err(StageError::Data(
            "at least two training years are required to fit a forecaster".into(),
        ));
    }

    let mut forecasts_text = String::from("set,pair_a,pair_b,feature_name,value\n");
    let mut losses_text = String::from("model,epoch,loss\n");
    for (si, spec) in set_specs(cfg, &layout).iter().enumerate() {
        let projected: Vec<Vec<Vec<f64>>> = inst
            .series
            .iter()
            .map(|s| s.iter().map(|v| spec.project(v)).collect())
            .collect();
        let train_ids: Vec<usize> = (0..projected.len()).filter(|&i| !inst.holdout[i]).collect();

        // Numeric forecaster: predict the last training year's numeric dims
        // from the preceding years.
        let numeric_data: Vec<(Vec<Vec<f64>>, Vec<f64>)> = train_ids
            .iter()
            .map(|&i| {
                let s = &projected[i];
                let target: Vec<f64> = spec.numeric.iter().map(|&d| s[t_len - 1][d]).collect();
                (s[..t_len - 1].to_vec(), target)
            })
            .collect();
        let (numeric_net, trace) = train_forecaster(
            &numeric_data,
            spec.dims.len(),
            spec.numeric.len(),
            ForecastHead::Numeric,
            &cfg.hidden,
            &train_config(cfg, 100 + si as u64 * 10),
        )?;
        push_losses(&mut losses_text, &format!("{}_numeric", spec.name), &trace);
        numeric_net
            .save(&out_path(cfg, &format!("forecaster_{}_numeric.json", spec.name)))
            .map_err(StageError::from)?;

        // One categorical forecaster per community block; all-zero targets
        // (endpoint absent in the final training year) are skipped.
        let mut block_nets: Vec<LstmNet> = Vec::new();
        for (bi, block) in spec.blocks.iter().enumerate() {
            let data: Vec<(Vec<Vec<f64>>, Vec<f64>)> = train_ids
                .iter()
                .filter_map(|&i| {
                    let s = &projected[i];
                    let target: Vec<f64> = block.iter().map(|&d| s[t_len - 1][d]).collect();
                    if target.iter().sum::<f64>() > 0.5 {
                        Some((s[..t_len - 1].to_vec(), target))
                    } else {
                        None
                    }
                })
                .collect();
            if data.is_empty() {
                return Err(StageError::Data(format!(
                    "feature set {}: categorical block {bi} has no one-hot targets",
                    spec.name
                )));
            }
            let (net, trace) = train_forecaster(
                &data,
                spec.dims.len(),
                block.len(),
                ForecastHead::Categorical,
                &cfg.hidden,
                &train_config(cfg, 100 + si as u64 * 10 + 1 + bi as u64),
            )?;
            push_losses(&mut losses_text, &format!("{}_cat{bi}", spec.name), &trace);
            net.save(&out_path(cfg, &format!("forecaster_{}_cat{bi}.json", spec.name)))
                .map_err(StageError::from)?;
            block_nets.push(net);
        }

        // Forecast the test-year vector for every instance: numeric dims
        // from the numeric head, each block one-hot by argmax.
        for (i, s) in projected.iter().enumerate() {
            let numeric_pred = forecast(&numeric_net, s)?;
            let mut assembled = vec![0.0; spec.dims.len()];
            for (slot, &d) in spec.numeric.iter().enumerate() {
                assembled[d] = numeric_pred[slot];
            }
            for (block, net) in spec.blocks.iter().zip(&block_nets) {
                let probs = forecast(net, s)?;
                let argmax = probs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(j, _)| j)
                    .unwrap_or(0);
                assembled[block[argmax]] = 1.0;
            }
            let (a, b) = inst.pairs[i];
            for (slot, &d) in spec.dims.iter().enumerate() {
                use std::fmt::Write as _;
                let _ = writeln!(
                    forecasts_text,
                    "{},{},{},{},{}",
                    spec.name,
                    corpus.keyword_name(a),
                    corpus.keyword_name(b),
                    layout.names()[d],
                    fmt_real(assembled[slot])
                );
            }
        }
    }
    write_text(&out_path(cfg, FORECASTS_CSV), &forecasts_text)?;
    write_text(&out_path(cfg, FORECAST_LOSSES_CSV), &losses_text)?;
    update_manifest(cfg)?;
    Ok(())
}

/// Per-set forecast vectors keyed by instance pair, in file order.
fn load_forecasts(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    layout: &FeatureLayout,
    specs: &[FeatureSetSpec],
) -> Result<HashMap<(String, KeywordId, KeywordId), Vec<f64>>, StageError> {
    let path = out_path(cfg, FORECASTS_CSV);
    require_file(&path)?;
    let name_to_slot: HashMap<&str, HashMap<usize, usize>> = specs
        .iter()
        .map(|spec| {
            let slots: HashMap<usize, usize> = spec
                .dims
                .iter()
                .enumerate()
                .map(|(slot, &d)| (d, slot))
                .collect();
            (spec.name.as_str(), slots)
        })
        .collect();
    let dims: HashMap<&str, usize> = specs
        .iter()
        .map(|spec| (spec.name.as_str(), spec.dims.len()))
        .collect();

    let mut map: HashMap<(String, KeywordId, KeywordId), Vec<f64>> = HashMap::new();
    let text = std::fs::read_to_string(&path)?;
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(StageError::Data(format!("forecasts.csv line {}", idx + 1)));
        }
        let set = parts[0];
        let (Some(slots), Some(&dim)) = (name_to_slot.get(set), dims.get(set)) else {
            continue; // sets outside the configured list
        };
        let a = corpus.keywords.get(parts[1]).map(KeywordId).ok_or_else(|| {
            StageError::Data(format!("forecasts.csv: unknown keyword {}", parts[1]))
        })?;
        let b = corpus.keywords.get(parts[2]).map(KeywordId).ok_or_else(|| {
            StageError::Data(format!("forecasts.csv: unknown keyword {}", parts[2]))
        })?;
        let full_dim = layout
            .index_of(parts[3])
            .ok_or_else(|| StageError::Data(format!("forecasts.csv: bad feature {}", parts[3])))?;
        let slot = *slots.get(&full_dim).ok_or_else(|| {
            StageError::Data(format!(
                "forecasts.csv: feature {} outside set {set}",
                parts[3]
            ))
        })?;
        let value: f64 = parts[4]
            .parse()
            .map_err(|_| StageError::Data(format!("forecasts.csv line {}", idx + 1)))?;
        map.entry((set.to_string(), a, b))
            .or_insert_with(|| vec![0.0; dim])[slot] = value;
    }
    Ok(map)
}

/// Trains the per-set classifiers on training years plus the forecasted
/// test-year vector and scores every instance.
pub fn stage_classify(cfg: &PipelineConfig) -> Result<(), StageError> {
    let (corpus, _) = load_corpus(cfg)?;
    let layout = FeatureLayout::standard();
    let inst = load_instances(cfg, &corpus, &layout, false)?;
    let specs = set_specs(cfg, &layout);
    let forecasts = load_forecasts(cfg, &corpus, &layout, &specs)?;

    let mut scores_text = String::from("set,pair_a,pair_b,split,label,score\n");
    let mut losses_text = String::from("set,epoch,loss\n");
    for (si, spec) in specs.iter().enumerate() {
        // Sequence = projected training years + forecasted test-year vector.
        let sequences: Vec<Vec<Vec<f64>>> = inst
            .series
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (a, b) = inst.pairs[i];
                let mut seq: Vec<Vec<f64>> = s.iter().map(|v| spec.project(v)).collect();
                let key = (spec.name.clone(), a, b);
                let forecasted = forecasts.get(&key).ok_or_else(|| {
                    StageError::Data(format!(
                        "forecasts.csv has no entry for set {} pair ({}, {})",
                        spec.name,
                        corpus.keyword_name(a),
                        corpus.keyword_name(b)
                    ))
                })?;
                seq.push(forecasted.clone());
                Ok(seq)
            })
            .collect::<Result<_, StageError>>()?;

        let train_data: Vec<(Vec<Vec<f64>>, Vec<f64>)> = sequences
            .iter()
            .enumerate()
            .filter(|(i, _)| !inst.holdout[*i])
            .map(|(i, seq)| (seq.clone(), vec![if inst.labels[i] { 1.0 } else { 0.0 }]))
            .collect();
        let (net, trace) = train_classifier(
            &train_data,
            spec.dims.len(),
            &cfg.hidden,
            &train_config(cfg, 100 + si as u64 * 10 + 9),
        )?;
        push_losses(&mut losses_text, &spec.name, &trace);
        net.save(&out_path(cfg, &format!("classifier_{}.json", spec.name)))
            .map_err(StageError::from)?;

        for (i, seq) in sequences.iter().enumerate() {
            let score = forecast(&net, seq)?[0];
            let (a, b) = inst.pairs[i];
            use std::fmt::Write as _;
            let _ = writeln!(
                scores_text,
                "{},{},{},{},{},{}",
                spec.name,
                corpus.keyword_name(a),
                corpus.keyword_name(b),
                if inst.holdout[i] { "holdout" } else { "train" },
                if inst.labels[i] { "positive" } else { "negative" },
                fmt_real(score)
            );
        }
    }
    write_text(&out_path(cfg, SCORES_CSV), &scores_text)?;
    write_text(&out_path(cfg, CLASSIFIER_LOSSES_CSV), &losses_text)?;
    update_manifest(cfg)?;
    Ok(())
}

/// Holdout metrics per feature set: AUC, accuracy, ROC and P-R curves, and
/// per-feature normalized RMSE of the forecasts against the test-year
/// actuals.
pub fn stage_evaluate(cfg: &PipelineConfig) -> Result<(), StageError> {
    let (corpus, _) = load_corpus(cfg)?;
    let layout = FeatureLayout::standard();
    let specs = set_specs(cfg, &layout);
    let scores_path = out_path(cfg, SCORES_CSV);
    require_file(&scores_path)?;
    let inst = load_instances(cfg, &corpus, &layout, true)?;
    let forecasts = load_forecasts(cfg, &corpus, &layout, &specs)?;

    // Holdout scores per set, in file order.
    let mut scores: HashMap<String, Vec<(f64, bool)>> = HashMap::new();
    let text = std::fs::read_to_string(&scores_path)?;
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(StageError::Data(format!("scores.csv line {}", idx + 1)));
        }
        if parts[3] != "holdout" {
            continue;
        }
        let score: f64 = parts[5]
            .parse()
            .map_err(|_| StageError::Data(format!("scores.csv line {}", idx + 1)))?;
        scores
            .entry(parts[0].to_string())
            .or_default()
            .push((score, parts[4] == "positive"));
    }

    let pair_index: HashMap<(KeywordId, KeywordId), usize> = inst
        .pairs
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, i))
        .collect();

    for spec in &specs {
        let set_scores = scores.get(&spec.name).ok_or_else(|| {
            StageError::Data(format!("scores.csv has no rows for set {}", spec.name))
        })?;
        let (score_vals, labels): (Vec<f64>, Vec<bool>) = set_scores.iter().copied().unzip();
        let (auc, roc_points) = roc_auc(&score_vals, &labels)?;
        let pr_points = pr_curve(&score_vals, &labels)?;
        let accuracy = accuracy_at(&score_vals, &labels, cfg.threshold);

        // Normalized RMSE per numeric feature over holdout instances.
        let holdout_ids: Vec<usize> = (0..inst.pairs.len()).filter(|&i| inst.holdout[i]).collect();
        let mut nrmse = Vec::new();
        for &slot in &spec.numeric {
            let full_dim = spec.dims[slot];
            let mut predicted = Vec::with_capacity(holdout_ids.len());
            let mut actual = Vec::with_capacity(holdout_ids.len());
            for &i in &holdout_ids {
                let (a, b) = inst.pairs[i];
                let key = (spec.name.clone(), a, b);
                let forecast_vec = forecasts.get(&key).ok_or_else(|| {
                    StageError::Data(format!("no forecast for set {}", spec.name))
                })?;
                predicted.push(forecast_vec[slot]);
                let idx = pair_index[&(a, b)];
                actual.push(inst.test_actuals[idx][full_dim]);
            }
            let value = match normalized_rmse(&predicted, &actual) {
                Ok(v) => Some(v),
                Err(CoreError::ConstantActual) => None,
                Err(e) => return Err(e.into()),
            };
            nrmse.push((layout.names()[full_dim].clone(), value));
        }

        let report = EvalReport {
            nrmse,
            accuracy,
            auc,
            roc_points,
            pr_points,
            threshold: cfg.threshold,
        };
        write_text(
            &out_path(cfg, &format!("report_{}.txt", spec.name)),
            &report.to_key_value_text(),
        )?;
        write_text(&out_path(cfg, &format!("roc_{}.csv", spec.name)), &report.roc_csv())?;
        write_text(&out_path(cfg, &format!("pr_{}.csv", spec.name)), &report.pr_csv())?;
    }
    update_manifest(cfg)?;
    Ok(())
}

fn tag_stage(marker: &Path, name: &str, e: StageError) -> StageError {
    let _ = std::fs::write(marker, format!("stage {name}: {e}\n"));
    let msg = format!("stage {name}: {}", e.message());
    match e {
        StageError::Usage(_) => StageError::Usage(msg),
        StageError::Data(_) => StageError::Data(msg),
        StageError::Numeric(_) => StageError::Numeric(msg),
    }
}

/// Runs ingest through evaluate; on failure a FAILED marker naming the
/// stage is left next to the partial outputs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(), StageError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let marker = out_path(cfg, FAILED_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker)?;
    }
    let stages: [(&str, fn(&PipelineConfig) -> Result<(), StageError>); 8] = [
        ("ingest", stage_ingest),
        ("build-kcn", stage_build_kcn),
        ("centrality", |c| stage_centrality(c, None)),
        ("communities", stage_communities),
        ("features", stage_features),
        ("forecast", stage_forecast),
        ("classify", stage_classify),
        ("evaluate", stage_evaluate),
    ];
    for (name, stage) in stages {
        stage(cfg).map_err(|e| tag_stage(&marker, name, e))?;
    }
    Ok(())
}
