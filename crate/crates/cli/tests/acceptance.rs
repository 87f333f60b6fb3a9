//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `--nocapture` to see them). Oracles are
//! recoded here, independent of the library implementations they check.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kcn_cli::config::PipelineConfig;
use kcn_cli::stages;
use kcn_core::centrality::{recursive_centrality, Variant};
use kcn_core::corpus::{ingest_reader, yearly_evolution_stats, IngestOptions, NormalizationRules};
use kcn_core::eval::{accuracy_at, roc_auc};
use kcn_core::features::{
    build_instances, citation_weighted_recency, community_importance, FeatureContext,
    FeatureParams,
};
use kcn_core::genealogy::{assign_communities, CommunityLabel, CommunityScores};
use kcn_core::kcn::{
    build_temporal_kcn, BipartiteIncidence, BipartiteMode, YearlySnapshot,
};
use kcn_core::synth::{generate, SynthConfig};
use kcn_core::KeywordId;
use kcn_neural::gradcheck::gradient_check;
use kcn_neural::{forecast, train_forecaster, ForecastHead, HeadKind, LstmNet, TrainConfig};

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

fn random_dense_incidence(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let rows = rng.random_range(2..=50);
    let cols = rng.random_range(2..=50);
    let p = rng.random_range(0.08..0.5);
    let mut m = vec![vec![0.0; cols]; rows];
    for row in m.iter_mut() {
        for cell in row.iter_mut() {
            if rng.random::<f64>() < p {
                *cell = 1.0;
            }
        }
    }
    for (r, row) in m.iter_mut().enumerate() {
        if row.iter().all(|&x| x == 0.0) {
            row[r % cols] = 1.0;
        }
    }
    for c in 0..cols {
        if (0..rows).all(|r| m[r][c] == 0.0) {
            m[c % rows][c] = 1.0;
        }
    }
    m
}

fn to_sparse(m: &[Vec<f64>]) -> BipartiteIncidence {
    let cols = (0..m[0].len() as u32).map(KeywordId).collect();
    let rows: Vec<Vec<u32>> = m
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(c, _)| c as u32)
                .collect()
        })
        .collect();
    BipartiteIncidence::from_rows(2000, BipartiteMode::KeywordAuthor, cols, rows).unwrap()
}

/// Dense brute-force recursion, nested loops over the full matrix.
fn dense_recursive(m: &[Vec<f64>], n_iters: usize) -> (Vec<f64>, Vec<f64>) {
    let rows = m.len();
    let cols = m[0].len();
    let psi_k0: Vec<f64> = (0..cols).map(|c| (0..rows).map(|r| m[r][c]).sum()).collect();
    let psi_a0: Vec<f64> = (0..rows).map(|r| (0..cols).map(|c| m[r][c]).sum()).collect();
    let mut psi_k = psi_k0.clone();
    let mut psi_a = psi_a0.clone();
    for _ in 0..n_iters {
        let mut next_k = vec![0.0; cols];
        for (c, out) in next_k.iter_mut().enumerate() {
            let mut sum = 0.0;
            for r in 0..rows {
                sum += m[r][c] * psi_a[r];
            }
            *out = sum / psi_k0[c];
        }
        let mut next_a = vec![0.0; rows];
        for (r, out) in next_a.iter_mut().enumerate() {
            let mut sum = 0.0;
            for c in 0..cols {
                sum += m[r][c] * psi_k[c];
            }
            *out = sum / psi_a0[r];
        }
        psi_k = next_k;
        psi_a = next_a;
    }
    (psi_k, psi_a)
}

fn acceptance_corpus() -> kcn_core::corpus::Corpus {
    let cfg = SynthConfig {
        rng_seed: 7,
        ..SynthConfig::default()
    };
    let (text, _) = generate(&cfg).unwrap();
    ingest_reader(
        Cursor::new(text),
        &NormalizationRules::builtin(),
        &IngestOptions::default(),
    )
    .unwrap()
    .0
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_recursive_centrality_matches_dense_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let dense = random_dense_incidence(&mut rng);
        let sparse = to_sparse(&dense);
        let (psi_k, psi_a) = recursive_centrality(&sparse, 20).unwrap();
        let (ok, oa) = dense_recursive(&dense, 20);
        for (x, y) in psi_k.iter().zip(&ok).chain(psi_a.iter().zip(&oa)) {
            worst = worst.max((x - y).abs());
        }
    }
    let elapsed = started.elapsed();
    assert!(worst < 1e-9, "max abs diff {worst}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "PASS criterion 01: sparse vs dense recursion on 50 incidences, \
         max abs diff {worst:.3e} (< 1e-9), {elapsed:?} (< 1 s)"
    );
}

#[test]
fn criterion_02_base_case_equals_column_and_row_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    for _ in 0..50 {
        let dense = random_dense_incidence(&mut rng);
        let sparse = to_sparse(&dense);
        let (psi_k0, psi_a0) = recursive_centrality(&sparse, 0).unwrap();
        let col_sums: Vec<f64> = (0..dense[0].len())
            .map(|c| dense.iter().map(|row| row[c]).sum())
            .collect();
        let row_sums: Vec<f64> = dense.iter().map(|row| row.iter().sum()).collect();
        assert_eq!(psi_k0, col_sums, "psi_k(0) must equal column sums exactly");
        assert_eq!(psi_a0, row_sums, "psi_a(0) must equal row sums exactly");
    }
    println!("PASS criterion 02: psi(0) equals column/row sums exactly on 50 incidences");
}

#[test]
fn criterion_03_genealogy_matches_bfs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut violations = 0usize;
    for case in 0..50 {
        // Random snapshot.
        let n_nodes = rng.random_range(5..60);
        let n_edges = rng.random_range(0..120);
        let mut snap = YearlySnapshot::new(2000);
        for k in 0..n_nodes {
            snap.add_node(KeywordId(k));
        }
        for _ in 0..n_edges {
            let a = rng.random_range(0..n_nodes);
            let b = rng.random_range(0..n_nodes);
            snap.add_edge(KeywordId(a), KeywordId(b));
        }
        let n_gp = rng.random_range(1..8);
        let grandparents: Vec<KeywordId> = (0..n_gp)
            .map(|_| KeywordId(rng.random_range(0..n_nodes + 5)))
            .collect();
        let assignment =
            assign_communities(&snap, Variant::Au, &grandparents, CommunityScores::default());

        // Oracle: two BFS rounds from the grandparent layer, then guests.
        let mut oracle: BTreeMap<KeywordId, CommunityLabel> = BTreeMap::new();
        let mut frontier: Vec<KeywordId> = grandparents
            .iter()
            .copied()
            .filter(|&k| snap.contains_node(k))
            .collect();
        frontier.sort();
        frontier.dedup();
        for &k in &frontier {
            oracle.insert(k, CommunityLabel::Grandparent);
        }
        for label in [CommunityLabel::Parent, CommunityLabel::Child] {
            let mut next = Vec::new();
            for &k in &frontier {
                for nb in snap.neighbors(k) {
                    if !oracle.contains_key(&nb) {
                        oracle.insert(nb, label);
                        next.push(nb);
                    }
                }
            }
            next.sort();
            next.dedup();
            frontier = next;
        }
        for k in snap.nodes() {
            oracle.entry(k).or_insert(CommunityLabel::Guest);
        }
        assert_eq!(assignment.labels(), &oracle, "case {case}");

        // Definitional invariants.
        for (&k, &label) in assignment.labels() {
            let has = |want: CommunityLabel| {
                snap.neighbors(k)
                    .any(|nb| assignment.label_of(nb) == Some(want))
            };
            let ok = match label {
                CommunityLabel::Grandparent => true,
                CommunityLabel::Parent => has(CommunityLabel::Grandparent),
                CommunityLabel::Child => {
                    has(CommunityLabel::Parent) && !has(CommunityLabel::Grandparent)
                }
                CommunityLabel::Guest => {
                    !has(CommunityLabel::Grandparent) && !has(CommunityLabel::Parent)
                }
            };
            if !ok {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
    println!(
        "PASS criterion 03: labels equal the BFS oracle on 50 snapshots, 0 invariant violations"
    );
}

#[test]
fn criterion_04_pair_feature_equations() {
    // Community importance: direct substitution and symmetry.
    assert!((community_importance(1.0, 0.8, 0.25, 0.4) - 0.9).abs() < f64::EPSILON);
    assert_eq!(community_importance(0.5, 0.0, 0.9, 0.0), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    for _ in 0..100 {
        let (g_a, v_a, g_b, v_b) = (
            rng.random::<f64>(),
            rng.random_range(-3.0..3.0),
            rng.random::<f64>(),
            rng.random_range(-3.0..3.0),
        );
        assert_eq!(
            community_importance(g_a, v_a, g_b, v_b),
            community_importance(g_b, v_b, g_a, v_a)
        );
    }

    // Citation-weighted recency: gamma casework and symmetry.
    assert_eq!(citation_weighted_recency(3.0, 2.0, true, true, 4), 40.0);
    assert_eq!(citation_weighted_recency(3.0, 0.0, true, false, 7), 21.0);
    assert_eq!(citation_weighted_recency(9.0, 5.0, false, false, 3), 0.0);
    for _ in 0..100 {
        let h_a = rng.random_range(0.0..50.0);
        let h_b = rng.random_range(0.0..50.0);
        let (pa, pb) = (rng.random::<bool>(), rng.random::<bool>());
        let t = rng.random_range(1..8);
        assert_eq!(
            citation_weighted_recency(h_a, h_b, pa, pb, t),
            citation_weighted_recency(h_b, h_a, pb, pa, t)
        );
        let gamma = match (pa, pb) {
            (true, true) => 2.0,
            (false, false) => 0.0,
            _ => 1.0,
        };
        assert_eq!(
            citation_weighted_recency(h_a, h_b, pa, pb, t),
            (h_a + h_b) * gamma * t as f64
        );
    }
    println!(
        "PASS criterion 04: pair-feature equations hold exactly (substitution, symmetry, gamma)"
    );
}

#[test]
fn criterion_05_instance_sampling_on_synthetic_corpus() {
    let corpus = acceptance_corpus();
    let kcn = build_temporal_kcn(&corpus);
    let (first, last) = corpus.year_range;
    let train_years: Vec<i32> = (first + 1..last).collect();
    let ctx = FeatureContext::build(
        &corpus,
        &kcn,
        train_years.clone(),
        last,
        &FeatureParams::default(),
    )
    .unwrap();
    let set = build_instances(&ctx, 10, 7).unwrap();

    let positives: Vec<_> = set.instances.iter().filter(|i| i.label).collect();
    let negatives = set.instances.len() - positives.len();
    assert_eq!(negatives, 10 * positives.len(), "exact 1:10 ratio");

    // Set-algebra oracle for the positive set.
    let mut train_nodes = std::collections::BTreeSet::new();
    let mut train_edges = std::collections::BTreeSet::new();
    for &y in &train_years {
        let snap = kcn.snapshot(y).unwrap();
        train_nodes.extend(snap.nodes());
        train_edges.extend(snap.edges().iter().copied());
    }
    let test_snap = kcn.snapshot(last).unwrap();
    let expected: std::collections::BTreeSet<(KeywordId, KeywordId)> = test_snap
        .edges()
        .iter()
        .copied()
        .filter(|&(a, b)| {
            train_nodes.contains(&a)
                && train_nodes.contains(&b)
                && test_snap.contains_node(a)
                && test_snap.contains_node(b)
                && !train_edges.contains(&(a, b))
        })
        .collect();
    let got: std::collections::BTreeSet<(KeywordId, KeywordId)> =
        positives.iter().map(|i| i.pair).collect();
    assert_eq!(got, expected, "positives equal the set-algebra oracle");

    // Non-connected invariant over every training snapshot.
    for inst in &set.instances {
        for &y in &train_years {
            assert!(
                !kcn.snapshot(y).unwrap().has_edge(inst.pair.0, inst.pair.1),
                "instance edge present in training year {y}"
            );
        }
    }
    println!(
        "PASS criterion 05: {} positives == oracle, {} negatives == 10x exactly, \
         no training-phase instance edges",
        positives.len(),
        negatives
    );
}

#[test]
fn criterion_06_gradient_check_over_random_nets() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let input_dim = rng.random_range(1..=5);
        let hidden = [rng.random_range(2..=6), rng.random_range(2..=6)];
        let (head, out_dim) = match case % 3 {
            0 => (HeadKind::Linear, rng.random_range(1..=4)),
            1 => (HeadKind::Softmax, rng.random_range(2..=4)),
            _ => (HeadKind::Sigmoid, 1),
        };
        let net = LstmNet::new(input_dim, &hidden, out_dim, head, 1000 + case as u64);
        let batch: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..rng.random_range(1..=4))
            .map(|_| {
                let steps = rng.random_range(1..=5);
                let seq: Vec<Vec<f64>> = (0..steps)
                    .map(|_| (0..input_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let target = match head {
                    HeadKind::Linear => {
                        (0..out_dim).map(|_| rng.random_range(-1.0..1.0)).collect()
                    }
                    HeadKind::Softmax => {
                        let mut t = vec![0.0; out_dim];
                        t[rng.random_range(0..out_dim)] = 1.0;
                        t
                    }
                    HeadKind::Sigmoid => vec![if rng.random::<bool>() { 1.0 } else { 0.0 }],
                };
                (seq, target)
            })
            .collect();
        let report = gradient_check(&net, &batch);
        worst = worst.max(report.max_rel_error);
        assert!(
            report.max_rel_error < 1e-4,
            "case {case}: {} at param {}",
            report.max_rel_error,
            report.worst_param
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "PASS criterion 06: gradient check over 20 random nets, \
         worst relative error {worst:.3e} (< 1e-4), {elapsed:?} (< 30 s)"
    );
}

#[test]
fn criterion_07_forecaster_sanity_constant_and_ramp() {
    let hidden = [32, 32];
    let cfg = TrainConfig {
        epochs: 500,
        rng_seed: 13,
        ..TrainConfig::default()
    };
    let nrmse = |pred: &[f64], actual: &[f64]| -> f64 {
        let mse = pred
            .iter()
            .zip(actual)
            .map(|(p, a)| (p - a) * (p - a))
            .sum::<f64>()
            / actual.len() as f64;
        let min = actual.iter().copied().fold(f64::INFINITY, f64::min);
        let max = actual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        mse.sqrt() / (max - min)
    };

    // Constant series, one constant per instance.
    let constant: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..64)
        .map(|i| {
            let c = i as f64 / 63.0;
            (vec![vec![c]; 6], vec![c])
        })
        .collect();
    let (net, _) =
        train_forecaster(&constant, 1, 1, ForecastHead::Numeric, &hidden, &cfg).unwrap();
    let preds: Vec<f64> = constant
        .iter()
        .map(|(s, _)| forecast(&net, s).unwrap()[0])
        .collect();
    let actuals: Vec<f64> = constant.iter().map(|(_, t)| t[0]).collect();
    let constant_err = nrmse(&preds, &actuals);
    assert!(constant_err < 0.01, "constant nrmse {constant_err}");

    // Linear ramps, held-out instances.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut ramp = |n: usize| -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
        (0..n)
            .map(|_| {
                let a = rng.random_range(0.0..0.4);
                let b = rng.random_range(0.02..0.09);
                let seq: Vec<Vec<f64>> = (1..=6).map(|t| vec![a + b * t as f64]).collect();
                (seq, vec![a + b * 7.0])
            })
            .collect()
    };
    let train_set = ramp(160);
    let held_out = ramp(40);
    let ramp_cfg = TrainConfig {
        rng_seed: 21,
        ..cfg.clone()
    };
    let (net, _) =
        train_forecaster(&train_set, 1, 1, ForecastHead::Numeric, &hidden, &ramp_cfg).unwrap();
    let preds: Vec<f64> = held_out
        .iter()
        .map(|(s, _)| forecast(&net, s).unwrap()[0])
        .collect();
    let actuals: Vec<f64> = held_out.iter().map(|(_, t)| t[0]).collect();
    let ramp_err = nrmse(&preds, &actuals);
    assert!(ramp_err < 0.15, "ramp nrmse {ramp_err}");
    println!(
        "PASS criterion 07: constant nrmse {constant_err:.4} (< 0.01), \
         held-out ramp nrmse {ramp_err:.4} (< 0.15) at 500 epochs"
    );
}

#[test]
fn criterion_08_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(5..200);
        // Coarse score grid so ties occur regularly.
        let scores: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(0..20) as f64) / 19.0)
            .collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        labels[0] = true;
        labels[n - 1] = false;

        let (auc, points) = roc_auc(&scores, &labels).unwrap();

        // Route 1: trapezoidal integral of the sweep points.
        let mut integral = 0.0;
        for w in points.windows(2) {
            integral += (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0;
        }
        // Route 2: brute-force pairwise comparison with half-credit ties.
        let mut wins = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            if !labels[i] {
                continue;
            }
            for j in 0..n {
                if labels[j] {
                    continue;
                }
                total += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        let pairwise = wins / total;
        worst = worst
            .max((auc - pairwise).abs())
            .max((integral - pairwise).abs());
        assert!(
            (auc - pairwise).abs() < 1e-12 && (integral - pairwise).abs() < 1e-12,
            "case {case}: auc {auc}, integral {integral}, pairwise {pairwise}"
        );
    }

    // Majority-class accuracy on 1:10 data is exactly 10/11.
    let scores = vec![0.0; 110];
    let mut labels = vec![false; 110];
    for l in labels.iter_mut().take(10) {
        *l = true;
    }
    let acc = accuracy_at(&scores, &labels, 0.5);
    assert_eq!(acc, 10.0 / 11.0);
    println!(
        "PASS criterion 08: sweep AUC == pairwise oracle on 100 sets \
         (worst diff {worst:.3e} < 1e-12), majority accuracy == 10/11 exactly"
    );
}

#[test]
fn criterion_09_end_to_end_synthetic_regression() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.output_dir = dir.path().join("out");
    cfg.rng_seed = 7;
    cfg.epochs = 500;

    stages::stage_synth(&cfg).unwrap();
    stages::run_pipeline(&cfg).unwrap();
    let first_run = started.elapsed();

    let read_auc = |set: &str| -> f64 {
        let text =
            std::fs::read_to_string(cfg.output_dir.join(format!("report_{set}.txt"))).unwrap();
        text.lines()
            .find(|l| l.starts_with("auc = "))
            .and_then(|l| l.trim_start_matches("auc = ").parse().ok())
            .expect("auc line")
    };
    let auc_h_au = read_auc("h_au");
    let auc_pa = read_auc("pa");
    assert!(auc_h_au >= 0.65, "h_au auc {auc_h_au} < 0.65");
    assert!(
        auc_h_au >= auc_pa - 0.02,
        "h_au auc {auc_h_au} trails pa {auc_pa} by more than 0.02"
    );

    // Training-loss invariant: per 10-epoch windows, non-increasing.
    let losses = std::fs::read_to_string(cfg.output_dir.join("classifier_losses.csv")).unwrap();
    let mut by_set: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in losses.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        by_set
            .entry(parts[0].to_string())
            .or_default()
            .push(parts[2].parse().unwrap());
    }
    for (set, trace) in &by_set {
        let windows: Vec<f64> = trace
            .chunks(10)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        for w in windows.windows(2) {
            assert!(
                w[1] <= w[0],
                "{set}: windowed training loss increased {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    // Re-run reproducibility: byte-identical manifest.
    let manifest_first = std::fs::read(cfg.output_dir.join("manifest.json")).unwrap();
    stages::run_pipeline(&cfg).unwrap();
    let manifest_second = std::fs::read(cfg.output_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest_first, manifest_second, "manifest changed on re-run");

    let total = started.elapsed();
    assert!(
        first_run.as_secs_f64() < 600.0,
        "pipeline took {first_run:?} (>= 10 min)"
    );
    println!(
        "PASS criterion 09: auc(h_au) {auc_h_au:.3} >= 0.65 and >= auc(pa) {auc_pa:.3} - 0.02, \
         windowed losses non-increasing, byte-identical manifest on re-run, \
         run {first_run:?} (< 10 min, both runs {total:?})"
    );
}

#[test]
fn criterion_10_evolution_partition_identities() {
    for (seed, years, articles) in [(7u64, 8usize, 150usize), (11, 5, 60), (3, 4, 40)] {
        let synth_cfg = SynthConfig {
            rng_seed: seed,
            years,
            articles_per_year: articles,
            ..SynthConfig::default()
        };
        let (text, _) = generate(&synth_cfg).unwrap();
        let (corpus, _) = ingest_reader(
            Cursor::new(text),
            &NormalizationRules::builtin(),
            &IngestOptions::default(),
        )
        .unwrap();
        let kcn = build_temporal_kcn(&corpus);
        let rows = yearly_evolution_stats(&corpus, &kcn).unwrap();
        assert!(!rows.is_empty());
        for row in rows {
            assert_eq!(row.v_n + row.v_o, row.v_t, "node partition, year {}", row.year);
            assert_eq!(
                row.e_oo_rec + row.e_oo_new + row.e_no + row.e_nn,
                row.e,
                "edge partition, year {}",
                row.year
            );
        }
    }
    println!(
        "PASS criterion 10: node and edge class partitions hold on every generated corpus year"
    );
}
