//! The benchmark harness: split sampling, repeated runs, the
//! ACC → test-accuracy conversion, and report assembly.
//!
//! ACC is accuracy over all nodes (train and test together). Test accuracy
//! derives from it under the perfect-training assumption:
//!
//!   test = (ACC − f) / (1 − f)      with f the training fraction
//!
//! Repetitions are independent (fresh split, fresh model seed) and may run
//! in parallel; results are assembled in repetition order.

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{
    load_citation_dataset, load_edge_list_dataset, load_karate, table_convention,
    cora_label_encoding, DatasetBundle,
};
use crate::error::{Error, Result};
use crate::graph::{DatasetStats, Graph};
use crate::harmonic::{harmonic_classify, HarmonicConfig};
use crate::models::{build_model, train_and_predict, ModelKind, ModelSpec, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gcn,
    Gat,
    Harmonic,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Gcn => "gcn",
            Method::Gat => "gat",
            Method::Harmonic => "harmonic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// ⌊ratio·N⌋ training nodes, ratio in (0, 1).
    Ratio(f64),
    /// A fixed number of training nodes.
    Count(usize),
    /// Exactly these nodes, every repetition.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
}

/// Uniform random training mask without replacement, sorted ascending.
/// Explicit mode validates and returns the given nodes.
pub fn sample_split(g: &Graph, spec: &SplitSpec) -> Result<Vec<usize>> {
    let n = g.num_nodes();
    let size = match &spec.mode {
        SplitMode::Ratio(r) => {
            if !(*r > 0.0 && *r < 1.0) {
                return Err(Error::InvalidSplit(format!(
                    "train ratio must lie in (0, 1), got {r}"
                )));
            }
            (r * n as f64).floor() as usize
        }
        SplitMode::Count(c) => *c,
        SplitMode::Explicit(nodes) => {
            let mut sorted = nodes.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidSplit("duplicate node in explicit split".into()));
            }
            if let Some(&bad) = sorted.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidSplit(format!(
                    "explicit node {bad} out of range for {n} nodes"
                )));
            }
            if sorted.is_empty() {
                return Err(Error::InvalidSplit("explicit split is empty".into()));
            }
            if sorted.len() >= n {
                return Err(Error::InvalidSplit(format!(
                    "explicit split covers all {n} nodes, leaving nothing to classify"
                )));
            }
            return Ok(sorted);
        }
    };
    if size == 0 {
        return Err(Error::InvalidSplit("training split is empty".into()));
    }
    if size >= n {
        return Err(Error::InvalidSplit(format!(
            "requested {size} training nodes from a graph with {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut mask: Vec<usize> = rand::seq::index::sample(&mut rng, n, size).into_vec();
    mask.sort_unstable();
    Ok(mask)
}

/// Eq. of the harness: test = (ACC − f)/(1 − f), clamped to 0 when ACC
/// falls below the training fraction (the caller records a warning).
pub fn test_accuracy_from_acc(acc: f64, train_fraction: f64) -> Result<f64> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidTrainFraction(train_fraction));
    }
    if acc < train_fraction {
        return Ok(0.0);
    }
    Ok((acc - train_fraction) / (1.0 - train_fraction))
}

/// Where an experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Karate,
    EdgeList {
        name: String,
        edges: PathBuf,
        labels: PathBuf,
    },
    Citation {
        name: String,
        cites: PathBuf,
        content: PathBuf,
        /// Apply the published Cora class encoding instead of
        /// first-appearance order.
        cora_encoding: bool,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<DatasetBundle> {
        match self {
            DatasetSource::Karate => Ok(load_karate()),
            DatasetSource::EdgeList { name, edges, labels } => {
                let mut bundle = load_edge_list_dataset(edges, labels)?
                    .with_stats_convention(table_convention(name));
                bundle.name = name.clone();
                Ok(bundle)
            }
            DatasetSource::Citation {
                name,
                cites,
                content,
                cora_encoding,
            } => {
                let encoding = cora_encoding.then(cora_label_encoding);
                let mut bundle = load_citation_dataset(cites, content, encoding.as_deref())?
                    .with_stats_convention(table_convention(name));
                bundle.name = name.clone();
                Ok(bundle)
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            DatasetSource::Karate => "karate",
            DatasetSource::EdgeList { name, .. } | DatasetSource::Citation { name, .. } => name,
        }
    }
}

/// A fully resolved run description, echoed verbatim into the report.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub method: Method,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub model: ModelSpec,
    pub harmonic: HarmonicConfig,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource, method: Method, split: SplitSpec) -> Self {
        Self {
            dataset,
            method,
            split,
            train: TrainConfig::default(),
            model: default_model_for(method),
            harmonic: HarmonicConfig::default(),
            output_path: None,
        }
    }

    fn for_method(&self, method: Method) -> Self {
        let mut cfg = self.clone();
        cfg.method = method;
        if resolved_kind(method).map_or(true, |k| k != cfg.model.kind) {
            cfg.model = default_model_for(method);
        }
        cfg.output_path = None;
        cfg
    }
}

fn resolved_kind(method: Method) -> Option<ModelKind> {
    match method {
        Method::Gcn => Some(ModelKind::Gcn),
        Method::Gat => Some(ModelKind::Gat),
        Method::Harmonic => None,
    }
}

fn default_model_for(method: Method) -> ModelSpec {
    match method {
        Method::Gat => ModelSpec::gat(),
        _ => ModelSpec::gcn(),
    }
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    /// Accuracy over all nodes, train and test together.
    pub acc: f64,
    /// Derived via the harness conversion from `acc`.
    pub test_acc: f64,
    /// Measured accuracy on the training mask, for auditing the
    /// perfect-training assumption.
    pub train_accuracy: f64,
    pub train_mask_hash: String,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub method: Method,
    pub config: ExperimentConfig,
    pub train_fraction: f64,
    pub repetitions: Vec<RepetitionResult>,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub test_acc_mean: f64,
    pub test_acc_std: f64,
    pub dataset_stats: DatasetStats,
    pub warnings: Vec<String>,
}

/// FNV-1a over the mask indices; stable across runs and platforms.
pub fn mask_hash(mask: &[usize]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &i in mask {
        for b in (i as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

fn mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count();
    xs.sum::<f64>() / n as f64
}

/// Sample (n−1) standard deviation; 0 for a single observation.
fn sample_std(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs.clone());
    (xs.map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// One training mask per repetition: a fresh seeded sample each time, except
/// explicit splits which repeat verbatim.
pub fn repetition_masks(
    g: &Graph,
    split: &SplitSpec,
    repetitions: usize,
) -> Result<Vec<Vec<usize>>> {
    (0..repetitions)
        .map(|r| {
            sample_split(
                g,
                &SplitSpec {
                    mode: split.mode.clone(),
                    seed: split.seed.wrapping_add(r as u64),
                },
            )
        })
        .collect()
}

fn run_repetition(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
    repetition: usize,
    mask: &[usize],
) -> Result<RepetitionResult> {
    let start = Instant::now();
    let (predictions, train_accuracy) = match cfg.method {
        Method::Harmonic => {
            let sol = harmonic_classify(&bundle.graph, &bundle.labels, mask, &cfg.harmonic)?;
            let correct = mask
                .iter()
                .filter(|&&i| sol.predictions[i] == bundle.labels.class_of(i))
                .count();
            (sol.predictions, correct as f64 / mask.len() as f64)
        }
        Method::Gcn | Method::Gat => {
            let mut model = build_model(
                &cfg.model,
                &bundle.graph,
                bundle.labels.num_classes(),
                cfg.train.seed.wrapping_add(repetition as u64),
            )?;
            let outcome = train_and_predict(&mut model, &bundle.labels, mask, &cfg.train)?;
            (outcome.predictions, outcome.train_accuracy)
        }
    };
    let acc = bundle.labels.accuracy(&predictions);
    let train_fraction = mask.len() as f64 / bundle.graph.num_nodes() as f64;
    let test_acc = test_accuracy_from_acc(acc, train_fraction)?;
    Ok(RepetitionResult {
        repetition,
        acc,
        test_acc,
        train_accuracy,
        train_mask_hash: mask_hash(mask),
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Runs the configured repetitions over precomputed masks. Shared by
/// [`run_experiment`] and [`compare_methods`] (which reuses one mask set
/// across methods to keep the comparison paired).
pub fn run_on_bundle(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
    masks: &[Vec<usize>],
) -> Result<ExperimentReport> {
    assert!(!masks.is_empty());
    let results: Vec<RepetitionResult> = masks
        .par_iter()
        .enumerate()
        .map(|(r, mask)| {
            run_repetition(bundle, cfg, r, mask).map_err(|e| Error::Repetition {
                repetition: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let train_fraction = masks[0].len() as f64 / bundle.graph.num_nodes() as f64;
    let mut warnings = Vec::new();
    if results.len() < 2 {
        warnings.push("insufficient repetitions: standard deviation reported as 0".to_string());
    }
    for rep in &results {
        if rep.acc < train_fraction {
            warnings.push(format!(
                "repetition {}: ACC {:.4} below the training fraction {:.4}; test accuracy clamped to 0",
                rep.repetition, rep.acc, train_fraction
            ));
        }
    }

    let report = ExperimentReport {
        dataset: bundle.name.clone(),
        method: cfg.method,
        config: cfg.clone(),
        train_fraction,
        acc_mean: mean(results.iter().map(|r| r.acc)),
        acc_std: sample_std(results.iter().map(|r| r.acc)),
        test_acc_mean: mean(results.iter().map(|r| r.test_acc)),
        test_acc_std: sample_std(results.iter().map(|r| r.test_acc)),
        dataset_stats: bundle.stats(),
        repetitions: results,
        warnings,
    };
    if let Some(path) = &cfg.output_path {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// Loads the dataset, samples one split per repetition, and runs the
/// configured method.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let bundle = cfg.dataset.load()?;
    let masks = repetition_masks(&bundle.graph, &cfg.split, cfg.train.repetitions.max(1))?;
    run_on_bundle(&bundle, cfg, &masks)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub dataset: String,
    pub reports: Vec<ExperimentReport>,
    /// Methods tied for the best mean test accuracy; a single entry when
    /// there is a strict winner.
    pub best: Vec<Method>,
}

/// Runs every method on identical per-repetition splits and picks the best
/// by mean test accuracy.
pub fn compare_methods(base: &ExperimentConfig, methods: &[Method]) -> Result<CompareReport> {
    if methods.len() < 2 {
        return Err(Error::TooFewMethods);
    }
    let bundle = base.dataset.load()?;
    let masks = repetition_masks(&bundle.graph, &base.split, base.train.repetitions.max(1))?;
    let reports: Vec<ExperimentReport> = methods
        .iter()
        .map(|&m| run_on_bundle(&bundle, &base.for_method(m), &masks))
        .collect::<Result<_>>()?;

    let best_mean = reports
        .iter()
        .map(|r| r.test_acc_mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let best = reports
        .iter()
        .filter(|r| r.test_acc_mean == best_mean)
        .map(|r| r.method)
        .collect();
    let compare = CompareReport {
        dataset: bundle.name.clone(),
        reports,
        best,
    };
    if let Some(path) = &base.output_path {
        std::fs::write(path, serde_json::to_string_pretty(&compare)?)?;
    }
    Ok(compare)
}

/// Plain-text table for one run, aligned like the published comparison.
pub fn render_report(report: &ExperimentReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}   method: {}", report.dataset, report.method);
    let s = &report.dataset_stats;
    let _ = writeln!(
        out,
        "nodes {}  edges {}  clusters {}  avg-degree {:.2}  avg-clustering {:.2}",
        s.num_nodes, s.num_edges, s.num_clusters, s.avg_degree, s.avg_clustering_coefficient
    );
    let _ = writeln!(
        out,
        "train fraction {:.4}  repetitions {}  seed {}",
        report.train_fraction,
        report.repetitions.len(),
        report.config.train.seed
    );
    let _ = writeln!(out, "{:>4} {:>10} {:>10} {:>10} {:>18} {:>8}", "rep", "acc", "test_acc", "train_acc", "mask_hash", "wall_ms");
    for r in &report.repetitions {
        let _ = writeln!(
            out,
            "{:>4} {:>10.4} {:>10.4} {:>10.4} {:>18} {:>8}",
            r.repetition, r.acc, r.test_acc, r.train_accuracy, r.train_mask_hash, r.wall_ms
        );
    }
    let _ = writeln!(
        out,
        "ACC {:.2}±{:.2}%   test accuracy {:.2}±{:.2}%",
        100.0 * report.acc_mean,
        100.0 * report.acc_std,
        100.0 * report.test_acc_mean,
        100.0 * report.test_acc_std
    );
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

/// Plain-text comparison table across methods.
pub fn render_comparison(cmp: &CompareReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}", cmp.dataset);
    let _ = writeln!(
        out,
        "{:<10} {:>16} {:>16}",
        "method", "ACC mean±std", "test mean±std"
    );
    for r in &cmp.reports {
        let _ = writeln!(
            out,
            "{:<10} {:>9.2}±{:.2}% {:>9.2}±{:.2}%",
            r.method.to_string(),
            100.0 * r.acc_mean,
            100.0 * r.acc_std,
            100.0 * r.test_acc_mean,
            100.0 * r.test_acc_std
        );
    }
    if cmp.best.len() == 1 {
        let _ = writeln!(out, "best: {}", cmp.best[0]);
    } else {
        let names: Vec<String> = cmp.best.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(out, "best: tie between {}", names.join(", "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_karate;
    use approx::assert_abs_diff_eq;

    fn karate_graph() -> Graph {
        load_karate().graph
    }

    #[test]
    fn explicit_split_returns_the_given_nodes() {
        let g = karate_graph();
        let spec = SplitSpec {
            mode: SplitMode::Explicit(vec![33, 0]),
            seed: 0,
        };
        assert_eq!(sample_split(&g, &spec).unwrap(), vec![0, 33]);
    }

    #[test]
    fn ratio_split_takes_the_floor() {
        // A 2708-node graph at ratio 0.8 trains on ⌊2166.4⌋ nodes.
        let edges: Vec<(usize, usize)> = (0..2707).map(|i| (i, i + 1)).collect();
        let g = Graph::from_undirected_edges(2708, &edges).unwrap();
        let spec = SplitSpec {
            mode: SplitMode::Ratio(0.8),
            seed: 9,
        };
        assert_eq!(sample_split(&g, &spec).unwrap().len(), 2166);
    }

    #[test]
    fn same_seed_samples_identical_masks() {
        let g = karate_graph();
        let spec = SplitSpec {
            mode: SplitMode::Ratio(0.5),
            seed: 1234,
        };
        assert_eq!(sample_split(&g, &spec).unwrap(), sample_split(&g, &spec).unwrap());
    }

    #[test]
    fn rejects_oversized_and_out_of_range_splits() {
        let g = karate_graph();
        let too_big = SplitSpec {
            mode: SplitMode::Count(34),
            seed: 0,
        };
        assert!(sample_split(&g, &too_big).is_err());
        let bad_node = SplitSpec {
            mode: SplitMode::Explicit(vec![34]),
            seed: 0,
        };
        assert!(sample_split(&g, &bad_node).is_err());
    }

    #[test]
    fn eq10_reproduces_hand_checked_values() {
        assert_abs_diff_eq!(
            test_accuracy_from_acc(0.9727, 0.8).unwrap(),
            0.8635,
            epsilon = 5e-4
        );
        assert_abs_diff_eq!(
            test_accuracy_from_acc(0.8529, 0.2499).unwrap(),
            0.8039,
            epsilon = 5e-4
        );
    }

    #[test]
    fn eq10_boundaries() {
        for r in [0.1, 0.5, 0.8] {
            assert_abs_diff_eq!(test_accuracy_from_acc(r, r).unwrap(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(test_accuracy_from_acc(1.0, r).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eq10_rejects_degenerate_fraction() {
        assert!(test_accuracy_from_acc(0.5, 0.0).is_err());
        assert!(test_accuracy_from_acc(0.5, 1.0).is_err());
    }

    #[test]
    fn eq10_clamps_below_chance() {
        assert_eq!(test_accuracy_from_acc(0.1, 0.8).unwrap(), 0.0);
    }

    #[test]
    fn single_repetition_reports_zero_std_and_a_flag() {
        let mut cfg = ExperimentConfig::new(
            DatasetSource::Karate,
            Method::Harmonic,
            SplitSpec {
                mode: SplitMode::Explicit(vec![0, 33]),
                seed: 0,
            },
        );
        cfg.train.repetitions = 1;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.repetitions.len(), 1);
        assert_eq!(report.acc_std, 0.0);
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("insufficient repetitions")));
    }

    #[test]
    fn aggregates_match_recomputation_from_repetitions() {
        let mut cfg = ExperimentConfig::new(
            DatasetSource::Karate,
            Method::Harmonic,
            SplitSpec {
                mode: SplitMode::Ratio(0.5),
                seed: 3,
            },
        );
        cfg.train.repetitions = 5;
        let report = run_experiment(&cfg).unwrap();
        let accs: Vec<f64> = report.repetitions.iter().map(|r| r.acc).collect();
        let m = accs.iter().sum::<f64>() / accs.len() as f64;
        let v = accs.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (accs.len() - 1) as f64;
        assert_abs_diff_eq!(report.acc_mean, m, epsilon = 1e-12);
        assert_abs_diff_eq!(report.acc_std, v.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn comparison_requires_two_methods() {
        let cfg = ExperimentConfig::new(
            DatasetSource::Karate,
            Method::Harmonic,
            SplitSpec {
                mode: SplitMode::Explicit(vec![0, 33]),
                seed: 0,
            },
        );
        let err = compare_methods(&cfg, &[Method::Harmonic]).unwrap_err();
        assert!(matches!(err, Error::TooFewMethods));
    }

    #[test]
    fn comparison_pairs_masks_across_methods() {
        let mut cfg = ExperimentConfig::new(
            DatasetSource::Karate,
            Method::Harmonic,
            SplitSpec {
                mode: SplitMode::Ratio(0.5),
                seed: 11,
            },
        );
        cfg.train.repetitions = 3;
        cfg.train.epochs = 5;
        let cmp = compare_methods(&cfg, &[Method::Harmonic, Method::Gcn]).unwrap();
        for r in 0..3 {
            assert_eq!(
                cmp.reports[0].repetitions[r].train_mask_hash,
                cmp.reports[1].repetitions[r].train_mask_hash
            );
        }
    }
}
