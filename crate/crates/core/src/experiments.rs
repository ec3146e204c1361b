//! Drivers for the headline experiments: state-count classification,
//! model regression per system size, the dephasing sweep, and the
//! coupling-case generalization study.

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::coupling::{DEFAULT_J_STRENGTH, DEFAULT_R_MAX, DEFAULT_R_MIN};
use crate::dataset::{generate_dataset, DatasetFile, RealizationSpec};
use crate::error::{CoreError, Result};
use crate::knn::{knn_evaluate, knn_fit, KnnEvaluation};
use crate::metrics::{build_regression_report, RecordPrediction, RegressionReport};
use crate::mlp::{
    mlp_train, EpochLoss, MlpArchitecture, MlpCheckpoint, TrainConfig,
};

pub const DEFAULT_Q_COUNT: usize = 200;
pub const DEFAULT_T_STAR: f64 = 0.15;
pub const DEFAULT_H_MAX: f64 = 1.0;
pub const DEFAULT_GAMMA_MAX: f64 = 1.0;
/// Coupling family used when an experiment does not vary the cases.
pub const DEFAULT_CASE_ID: u32 = 3;

/// Coupling placement shared by every case of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGeometry {
    pub j_strength: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl Default for CouplingGeometry {
    fn default() -> Self {
        CouplingGeometry {
            j_strength: DEFAULT_J_STRENGTH,
            r_min: DEFAULT_R_MIN,
            r_max: DEFAULT_R_MAX,
            seed: 9001,
        }
    }
}

fn base_spec(
    n_states: usize,
    record_count: usize,
    master_seed: u64,
    case_ids: Vec<u32>,
    geometry: &CouplingGeometry,
) -> RealizationSpec {
    RealizationSpec {
        n_states,
        q_count: DEFAULT_Q_COUNT,
        t_star: DEFAULT_T_STAR,
        h_max: DEFAULT_H_MAX,
        gamma_max: DEFAULT_GAMMA_MAX,
        gamma_mean_override: None,
        coupling_case_ids: case_ids,
        coupling_j: geometry.j_strength,
        coupling_r_min: geometry.r_min,
        coupling_r_max: geometry.r_max,
        coupling_seed: geometry.seed,
        master_seed,
        record_count,
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ClassificationConfig {
    pub class_values: Vec<u32>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub q_count: usize,
    pub t_star: f64,
    pub h_max: f64,
    pub gamma_max: f64,
    pub coupling_case_id: u32,
    pub geometry: CouplingGeometry,
    pub k_values: Vec<usize>,
    pub train_seed: u64,
    pub test_seed: u64,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        ClassificationConfig {
            class_values: vec![2, 3, 4, 5],
            train_per_class: 2500,
            test_per_class: 300,
            q_count: DEFAULT_Q_COUNT,
            t_star: DEFAULT_T_STAR,
            h_max: DEFAULT_H_MAX,
            gamma_max: DEFAULT_GAMMA_MAX,
            coupling_case_id: DEFAULT_CASE_ID,
            geometry: CouplingGeometry::default(),
            k_values: vec![1, 3, 5, 7],
            train_seed: 1_0001,
            test_seed: 2_0001,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KAccuracy {
    pub k: usize,
    pub accuracy: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct ClassificationOutcome {
    pub per_k: Vec<KAccuracy>,
    pub best_k: usize,
    /// Evaluation (accuracy, stderr, confusion matrix) at the best k.
    pub best: KnnEvaluation,
    pub train_size: usize,
    pub test_size: usize,
    /// Training class counts in class_values order.
    pub train_counts: Vec<usize>,
}

fn stack_features(datasets: &[(u32, DatasetFile)]) -> (Array2<f64>, Vec<u32>) {
    let q = datasets[0].1.spec.q_count;
    let total: usize = datasets.iter().map(|(_, d)| d.records.len()).sum();
    let mut features = Array2::<f64>::zeros((total, q));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (class, dataset) in datasets {
        for record in &dataset.records {
            for (j, v) in record.features.iter().enumerate() {
                features[[row, j]] = *v;
            }
            labels.push(*class);
            row += 1;
        }
    }
    (features, labels)
}

/// Generate per-class datasets, fit K-NN, and evaluate each candidate k on
/// the held-out records; the reported confusion matrix belongs to the best k.
pub fn run_classification_experiment(
    config: &ClassificationConfig,
) -> Result<ClassificationOutcome> {
    if config.class_values.is_empty() || config.k_values.is_empty() {
        return Err(CoreError::invalid("class_values and k_values must be non-empty"));
    }
    let spec_for = |class: u32, records: usize, seed: u64| {
        let mut spec = base_spec(
            class as usize,
            records,
            seed,
            vec![config.coupling_case_id],
            &config.geometry,
        );
        spec.q_count = config.q_count;
        spec.t_star = config.t_star;
        spec.h_max = config.h_max;
        spec.gamma_max = config.gamma_max;
        spec
    };

    let mut train_sets = Vec::new();
    let mut test_sets = Vec::new();
    for class in &config.class_values {
        let train = generate_dataset(&spec_for(
            *class,
            config.train_per_class,
            config.train_seed + *class as u64,
        ))?;
        let test = generate_dataset(&spec_for(
            *class,
            config.test_per_class,
            config.test_seed + *class as u64,
        ))?;
        train_sets.push((*class, train));
        test_sets.push((*class, test));
    }
    let train_counts = train_sets.iter().map(|(_, d)| d.records.len()).collect();
    let (train_features, train_labels) = stack_features(&train_sets);
    let (test_features, test_labels) = stack_features(&test_sets);
    drop(train_sets);
    drop(test_sets);

    let mut per_k = Vec::new();
    let mut best: Option<(usize, KnnEvaluation)> = None;
    for &k in &config.k_values {
        let model = knn_fit(train_features.clone(), train_labels.clone(), k)?;
        let eval = knn_evaluate(&model, &test_features, &test_labels)?;
        per_k.push(KAccuracy { k, accuracy: eval.accuracy, stderr: eval.stderr });
        let better = match &best {
            Some((_, current)) => eval.accuracy > current.accuracy,
            None => true,
        };
        if better {
            best = Some((k, eval));
        }
    }
    let (best_k, best) = best.expect("at least one k evaluated");
    Ok(ClassificationOutcome {
        per_k,
        best_k,
        best,
        train_size: train_features.nrows(),
        test_size: test_features.nrows(),
        train_counts,
    })
}

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RegressionRunConfig {
    pub n_states: usize,
    pub train_records: usize,
    pub test_records: usize,
    pub q_count: usize,
    pub t_star: f64,
    pub h_max: f64,
    pub gamma_max: f64,
    pub gamma_mean_override: Option<f64>,
    pub train_case_ids: Vec<u32>,
    pub test_case_ids: Vec<u32>,
    pub geometry: CouplingGeometry,
    pub hidden_dims: Vec<usize>,
    pub train: TrainConfig,
    pub train_seed: u64,
    pub test_seed: u64,
}

impl RegressionRunConfig {
    /// Paper-scale defaults for one system size.
    pub fn standard(n_states: usize) -> Self {
        RegressionRunConfig {
            n_states,
            train_records: 10_000,
            test_records: 1_000,
            q_count: DEFAULT_Q_COUNT,
            t_star: DEFAULT_T_STAR,
            h_max: DEFAULT_H_MAX,
            gamma_max: DEFAULT_GAMMA_MAX,
            gamma_mean_override: None,
            train_case_ids: vec![DEFAULT_CASE_ID],
            test_case_ids: vec![DEFAULT_CASE_ID],
            geometry: CouplingGeometry::default(),
            hidden_dims: vec![1024, 512, 256],
            train: TrainConfig::default(),
            train_seed: 3_0001 + n_states as u64,
            test_seed: 4_0001 + n_states as u64,
        }
    }

    fn train_spec(&self) -> RealizationSpec {
        let mut spec = base_spec(
            self.n_states,
            self.train_records,
            self.train_seed,
            self.train_case_ids.clone(),
            &self.geometry,
        );
        spec.q_count = self.q_count;
        spec.t_star = self.t_star;
        spec.h_max = self.h_max;
        spec.gamma_max = self.gamma_max;
        spec.gamma_mean_override = self.gamma_mean_override;
        spec
    }

    fn test_spec(&self) -> RealizationSpec {
        let mut spec = self.train_spec();
        spec.coupling_case_ids = self.test_case_ids.clone();
        spec.master_seed = self.test_seed;
        spec.record_count = self.test_records;
        spec
    }

    /// Upper edge for the dephasing-rate bins of reports.
    pub fn gamma_label_cap(&self) -> f64 {
        match self.gamma_mean_override {
            Some(gb) => 2.0 * gb,
            None => self.gamma_max,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressionOutcome {
    pub report: RegressionReport,
    /// Per-coupling-case breakdown of the test set (single entry when the
    /// test set uses one case).
    pub per_case_reports: Vec<(u32, RegressionReport)>,
    pub checkpoint: MlpCheckpoint,
    pub loss_history: Vec<EpochLoss>,
    pub best_epoch: usize,
}

/// Train a regressor on one dataset: features -> [label_h, label_gamma].
pub fn train_mlp_on_dataset(
    dataset: &DatasetFile,
    hidden_dims: &[usize],
    config: &TrainConfig,
) -> Result<(MlpCheckpoint, Vec<EpochLoss>, usize)> {
    let n = dataset.spec.n_states;
    let q = dataset.spec.q_count;
    let d = dataset.records.len();
    if d == 0 {
        return Err(CoreError::invalid("cannot train on an empty dataset"));
    }
    let out_dim = n * n + n;
    let mut features = Array2::<f64>::zeros((d, q));
    let mut targets = Array2::<f64>::zeros((d, out_dim));
    for (i, record) in dataset.records.iter().enumerate() {
        for (j, v) in record.features.iter().enumerate() {
            features[[i, j]] = *v;
        }
        for (j, v) in record.label_h.iter().enumerate() {
            targets[[i, j]] = *v;
        }
        for (j, v) in record.label_gamma.iter().enumerate() {
            targets[[i, n * n + j]] = *v;
        }
    }
    let arch = MlpArchitecture {
        input_dim: q,
        hidden_dims: hidden_dims.to_vec(),
        output_dim: out_dim,
    };
    let outcome = mlp_train(&features, &targets, &arch, config)?;
    let checkpoint = MlpCheckpoint::from_outcome(n, &arch, &outcome);
    Ok((checkpoint, outcome.loss_history, outcome.best_epoch))
}

/// Predict every record of a dataset with a trained checkpoint.
pub fn predict_dataset(
    checkpoint: &MlpCheckpoint,
    dataset: &DatasetFile,
) -> Result<Vec<RecordPrediction>> {
    if checkpoint.n_states != dataset.spec.n_states {
        return Err(CoreError::invalid(format!(
            "checkpoint was trained for N={}, dataset has N={}",
            checkpoint.n_states, dataset.spec.n_states
        )));
    }
    if checkpoint.arch.input_dim != dataset.spec.q_count {
        return Err(CoreError::invalid(format!(
            "checkpoint expects Q={}, dataset has Q={}",
            checkpoint.arch.input_dim, dataset.spec.q_count
        )));
    }
    dataset
        .records
        .par_iter()
        .map(|record| {
            let (h, gamma) = checkpoint.predict(&record.features)?;
            Ok(RecordPrediction {
                h_pred: h.iter().cloned().collect(),
                gamma_pred: gamma,
            })
        })
        .collect()
}

/// Evaluate a checkpoint on a test dataset: the overall report plus one
/// report per coupling case present.
pub fn evaluate_checkpoint(
    checkpoint: &MlpCheckpoint,
    dataset: &DatasetFile,
    gamma_bin_max: f64,
) -> Result<(RegressionReport, Vec<(u32, RegressionReport)>)> {
    let predictions = predict_dataset(checkpoint, dataset)?;
    let report = build_regression_report(
        &dataset.records,
        &predictions,
        dataset.spec.h_max,
        gamma_bin_max,
    )?;
    let mut case_ids: Vec<u32> = dataset.records.iter().map(|r| r.coupling_case_id).collect();
    case_ids.sort_unstable();
    case_ids.dedup();
    let mut per_case = Vec::new();
    if case_ids.len() > 1 {
        for case in case_ids {
            let (records, preds): (Vec<_>, Vec<_>) = dataset
                .records
                .iter()
                .zip(predictions.iter())
                .filter(|(r, _)| r.coupling_case_id == case)
                .map(|(r, p)| (r.clone(), p.clone()))
                .unzip();
            per_case.push((
                case,
                build_regression_report(&records, &preds, dataset.spec.h_max, gamma_bin_max)?,
            ));
        }
    }
    Ok((report, per_case))
}

/// Full regression experiment: generate train and test datasets (shared
/// coupling sets, fresh models), train, and evaluate on the held-out set.
pub fn run_regression_experiment(config: &RegressionRunConfig) -> Result<RegressionOutcome> {
    let train_set = generate_dataset(&config.train_spec())?;
    let (checkpoint, loss_history, best_epoch) =
        train_mlp_on_dataset(&train_set, &config.hidden_dims, &config.train)?;
    drop(train_set);
    let test_set = generate_dataset(&config.test_spec())?;
    let (report, per_case_reports) =
        evaluate_checkpoint(&checkpoint, &test_set, config.gamma_label_cap())?;
    Ok(RegressionOutcome { report, per_case_reports, checkpoint, loss_history, best_epoch })
}

// ---------------------------------------------------------------------------
// Dephasing sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub gamma_bar: f64,
    pub report: RegressionReport,
}

/// Per-point reports over a log-spaced grid of mean dephasing rates.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn point(&self, gamma_bar: f64) -> Option<&RegressionReport> {
        self.points
            .iter()
            .find(|p| (p.gamma_bar - gamma_bar).abs() <= 1e-12 * gamma_bar.abs().max(1.0))
            .map(|p| &p.report)
    }
}

/// One regression experiment per grid point, with the dephasing rates drawn
/// Uniform(0, 2*gamma_bar).
pub fn run_dephasing_sweep(
    base: &RegressionRunConfig,
    gamma_bar_grid: &[f64],
) -> Result<SweepReport> {
    if gamma_bar_grid.is_empty() {
        return Err(CoreError::invalid("sweep grid must be non-empty"));
    }
    let mut prev = 0.0;
    for &g in gamma_bar_grid {
        if !(0.1..=1.0e4).contains(&g) {
            return Err(CoreError::invalid(format!(
                "gamma_bar {g} outside the supported range [0.1, 1e4] MHz"
            )));
        }
        if g <= prev {
            return Err(CoreError::invalid("sweep grid must be strictly ascending"));
        }
        prev = g;
    }
    let mut points = Vec::with_capacity(gamma_bar_grid.len());
    for (i, &gamma_bar) in gamma_bar_grid.iter().enumerate() {
        let mut config = base.clone();
        config.gamma_mean_override = Some(gamma_bar);
        config.train_seed = base.train_seed + 1000 * (i as u64 + 1);
        config.test_seed = base.test_seed + 1000 * (i as u64 + 1);
        let outcome = run_regression_experiment(&config)?;
        points.push(SweepPoint { gamma_bar, report: outcome.report });
    }
    Ok(SweepReport { points })
}

// ---------------------------------------------------------------------------
// Coupling-case study
// ---------------------------------------------------------------------------

pub const MIXED_TRAIN_CASES: [u32; 3] = [4, 5, 6];
pub const ALL_CASES: [u32; 6] = [1, 2, 3, 4, 5, 6];

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case_id: u32,
    pub report: RegressionReport,
}

/// Per-case train/test results plus the mixed-training generalization run.
#[derive(Debug, Clone)]
pub struct CaseStudyReport {
    pub per_case: Vec<CaseResult>,
    /// Mixed run: trained on cases {4,5,6}, tested on the full mixture.
    pub mixed_full: RegressionReport,
    /// Mixture restricted to the trained cases {4,5,6}.
    pub mixed_seen: RegressionReport,
    /// Mixture restricted to the unseen cases {1,2,3}.
    pub mixed_unseen: RegressionReport,
    pub mixed_per_case: Vec<(u32, RegressionReport)>,
}

/// Train/test on each case separately, then train once on the {4,5,6} mix
/// and test on the full mixture with a seen/unseen breakdown.
///
/// `mixed_epochs` gives the mixed run its own epoch budget (it learns three
/// coupling families at once); `None` reuses the per-case budget.
pub fn run_coupling_case_study(
    base: &RegressionRunConfig,
    mixed_epochs: Option<usize>,
) -> Result<CaseStudyReport> {
    let mut per_case = Vec::with_capacity(ALL_CASES.len());
    for (i, case) in ALL_CASES.iter().enumerate() {
        let mut config = base.clone();
        config.train_case_ids = vec![*case];
        config.test_case_ids = vec![*case];
        config.train_seed = base.train_seed + 100 * (i as u64 + 1);
        config.test_seed = base.test_seed + 100 * (i as u64 + 1);
        let outcome = run_regression_experiment(&config)?;
        per_case.push(CaseResult { case_id: *case, report: outcome.report });
    }

    let mut mixed = base.clone();
    mixed.train_case_ids = MIXED_TRAIN_CASES.to_vec();
    mixed.test_case_ids = ALL_CASES.to_vec();
    mixed.train_seed = base.train_seed + 7000;
    mixed.test_seed = base.test_seed + 7000;
    if let Some(epochs) = mixed_epochs {
        mixed.train.epochs = epochs;
    }

    let train_set = generate_dataset(&mixed.train_spec())?;
    let (checkpoint, _, _) = train_mlp_on_dataset(&train_set, &mixed.hidden_dims, &mixed.train)?;
    drop(train_set);
    let test_set = generate_dataset(&mixed.test_spec())?;
    let predictions = predict_dataset(&checkpoint, &test_set)?;
    let gamma_cap = mixed.gamma_label_cap();

    let subset_report = |keep: &dyn Fn(u32) -> bool| -> Result<RegressionReport> {
        let (records, preds): (Vec<_>, Vec<_>) = test_set
            .records
            .iter()
            .zip(predictions.iter())
            .filter(|(r, _)| keep(r.coupling_case_id))
            .map(|(r, p)| (r.clone(), p.clone()))
            .unzip();
        build_regression_report(&records, &preds, mixed.h_max, gamma_cap)
    };

    let mixed_full = subset_report(&|_| true)?;
    let mixed_seen = subset_report(&|c| MIXED_TRAIN_CASES.contains(&c))?;
    let mixed_unseen = subset_report(&|c| !MIXED_TRAIN_CASES.contains(&c))?;
    let mut mixed_per_case = Vec::new();
    for case in ALL_CASES {
        mixed_per_case.push((case, subset_report(&|c| c == case)?));
    }

    Ok(CaseStudyReport { per_case, mixed_full, mixed_seen, mixed_unseen, mixed_per_case })
}

// ---------------------------------------------------------------------------
// Shared helpers for callers that work with dataset files
// ---------------------------------------------------------------------------

/// Feature matrix and class labels (all `n_states`) of one dataset.
pub fn dataset_features(dataset: &DatasetFile) -> (Array2<f64>, Vec<u32>) {
    let q = dataset.spec.q_count;
    let d = dataset.records.len();
    let mut features = Array2::<f64>::zeros((d, q));
    for (i, record) in dataset.records.iter().enumerate() {
        for (j, v) in record.features.iter().enumerate() {
            features[[i, j]] = *v;
        }
    }
    let labels = vec![dataset.spec.n_states as u32; d];
    (features, labels)
}

/// Concatenate feature matrices row-wise.
pub fn concat_features(parts: &[(Array2<f64>, Vec<u32>)]) -> (Array2<f64>, Vec<u32>) {
    let views: Vec<_> = parts.iter().map(|(m, _)| m.view()).collect();
    let features = ndarray::concatenate(Axis(0), &views).expect("uniform feature width");
    let labels = parts.iter().flat_map(|(_, l)| l.iter().cloned()).collect();
    (features, labels)
}
