//! Subcommand implementations. Every command reads its knobs from the
//! pipeline config, writes artifacts atomically under the output directory,
//! and reports errors with the owning stage name.

use std::path::{Path, PathBuf};

use qmodel_core::coupling::{coupling_stats, generate_coupling_set};
use qmodel_core::dataset::{
    generate_dataset, initial_state_index, load_dataset, sample_model,
    sample_model_with_mean_gamma, save_dataset, RealizationSpec,
};
use qmodel_core::experiments::{
    evaluate_checkpoint, run_classification_experiment, run_coupling_case_study,
    run_dephasing_sweep, train_mlp_on_dataset, CaseStudyReport, ClassificationConfig,
    ClassificationOutcome, CouplingGeometry, RegressionRunConfig,
};
use qmodel_core::fsio::atomic_write;
use qmodel_core::knn::ConfusionMatrix;
use qmodel_core::lindblad::populations_trajectory;
use qmodel_core::metrics::RegressionReport;
use qmodel_core::mlp::{checkpoint_load, checkpoint_save, EpochLoss, TrainConfig};
use qmodel_core::rng::record_rng;
use qmodel_core::{CoreError, DensityMatrix};

use crate::config::PipelineConfig;
use crate::csvout::{csv_f64, write_csv};
use crate::svg::{bar_chart, heatmap, line_chart, Series};
use crate::CliError;

type CmdResult = Result<(), CliError>;

fn stage<T>(name: &str, result: Result<T, CoreError>) -> Result<T, CliError> {
    result.map_err(|source| CliError::Stage { stage: name.to_string(), source })
}

fn ensure_out_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Stage { stage: "prepare-output".into(), source: e.into() })
}

fn train_config(config: &PipelineConfig) -> TrainConfig {
    TrainConfig {
        learning_rate: config.learning_rate,
        beta1: config.beta1,
        beta2: config.beta2,
        epsilon: config.epsilon,
        batch_size: config.batch_size,
        epochs: config.epochs,
        validation_fraction: config.validation_fraction,
        seed: config.train_seed,
    }
}

fn geometry(config: &PipelineConfig) -> CouplingGeometry {
    CouplingGeometry {
        j_strength: config.coupling_j,
        r_min: config.coupling_r_min,
        r_max: config.coupling_r_max,
        seed: config.coupling_seed,
    }
}

fn realization_spec(config: &PipelineConfig, role: DataRole) -> RealizationSpec {
    let (master_seed, record_count, case_ids) = match role {
        DataRole::Train => {
            (config.master_seed, config.record_count, config.coupling_case_ids.clone())
        }
        DataRole::Test => (
            config.test_master_seed,
            config.test_record_count,
            config.test_coupling_case_ids.clone(),
        ),
    };
    RealizationSpec {
        n_states: config.n_states,
        q_count: config.q_count,
        t_star: config.t_star,
        h_max: config.h_max,
        gamma_max: config.gamma_max,
        gamma_mean_override: config.gamma_bar,
        coupling_case_ids: case_ids,
        coupling_j: config.coupling_j,
        coupling_r_min: config.coupling_r_min,
        coupling_r_max: config.coupling_r_max,
        coupling_seed: config.coupling_seed,
        master_seed,
        record_count,
    }
}

fn regression_config(config: &PipelineConfig) -> RegressionRunConfig {
    RegressionRunConfig {
        n_states: config.n_states,
        train_records: config.record_count,
        test_records: config.test_record_count,
        q_count: config.q_count,
        t_star: config.t_star,
        h_max: config.h_max,
        gamma_max: config.gamma_max,
        gamma_mean_override: config.gamma_bar,
        train_case_ids: config.coupling_case_ids.clone(),
        test_case_ids: config.test_coupling_case_ids.clone(),
        geometry: geometry(config),
        hidden_dims: config.hidden_dims.clone(),
        train: train_config(config),
        train_seed: config.master_seed,
        test_seed: config.test_master_seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataRole {
    Train,
    Test,
}

pub fn dataset_path(config: &PipelineConfig, role: DataRole) -> PathBuf {
    let suffix = match role {
        DataRole::Train => "train",
        DataRole::Test => "test",
    };
    config.out_dir.join(format!("dataset_n{}_{suffix}.jsonl", config.n_states))
}

pub fn checkpoint_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join(format!("checkpoint_n{}.json", config.n_states))
}

// ---------------------------------------------------------------------------
// gen-couplings
// ---------------------------------------------------------------------------

pub fn cmd_gen_couplings(config: &PipelineConfig) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    let mut ids = config.coupling_case_ids.clone();
    ids.sort_unstable();
    ids.dedup();
    let mut stats_rows = Vec::new();
    for id in &ids {
        let case = stage(
            "gen-couplings",
            RealizationSpec::coupling_case(&realization_spec(config, DataRole::Train), *id),
        )?;
        let set = stage(
            "gen-couplings",
            generate_coupling_set(&case, config.n_states, config.q_count),
        )?;
        let header: Vec<String> = std::iter::once("q".to_string())
            .chain((0..config.n_states).map(|n| format!("kappa_{n}")))
            .collect();
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<String>> = (0..set.q_count)
            .map(|q| {
                std::iter::once(q.to_string())
                    .chain(set.row(q).iter().map(|v| csv_f64(*v)))
                    .collect()
            })
            .collect();
        write_path(config, &format!("couplings_case{id}.csv"), |p| {
            stage("gen-couplings", write_csv(p, &header_refs, &rows))
        })?;

        let stats = stage("gen-couplings", coupling_stats(&set))?;
        stats_rows.push(vec![
            id.to_string(),
            csv_f64(stats.sigma),
            csv_f64(stats.mu3_central),
            csv_f64(stats.skew_standardized),
        ]);
        println!(
            "case {id}: sigma = {:.2} MHz, standardized skew = {:.3}",
            stats.sigma, stats.skew_standardized
        );
    }
    write_path(config, "coupling_stats.csv", |p| {
        stage(
            "gen-couplings",
            write_csv(p, &["case_id", "sigma_mhz", "mu3_central_mhz3", "skew_standardized"], &stats_rows),
        )
    })
}

fn write_path<F>(config: &PipelineConfig, name: &str, f: F) -> CmdResult
where
    F: FnOnce(&Path) -> CmdResult,
{
    let path = config.out_dir.join(name);
    f(&path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

pub fn cmd_gen_data(config: &PipelineConfig, role: DataRole, out: Option<PathBuf>) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    let spec = realization_spec(config, role);
    let dataset = stage("gen-data", generate_dataset(&spec))?;
    let path = out.unwrap_or_else(|| dataset_path(config, role));
    stage("gen-data", save_dataset(&dataset, &path))?;
    println!(
        "wrote {} records (N={}, Q={}) to {}",
        dataset.records.len(),
        spec.n_states,
        spec.q_count,
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn write_confusion(config: &PipelineConfig, confusion: &ConfusionMatrix, stem: &str) -> CmdResult {
    let labels: Vec<String> = confusion.class_values.iter().map(|c| c.to_string()).collect();
    let header: Vec<String> = std::iter::once("actual\\predicted".to_string())
        .chain(labels.iter().cloned())
        .collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = confusion
        .class_values
        .iter()
        .enumerate()
        .map(|(i, class)| {
            std::iter::once(class.to_string())
                .chain((0..labels.len()).map(|j| confusion.counts[[i, j]].to_string()))
                .collect()
        })
        .collect();
    write_path(config, &format!("{stem}.csv"), |p| {
        stage("classify", write_csv(p, &header_refs, &rows))
    })?;

    let matrix: Vec<Vec<u64>> = (0..labels.len())
        .map(|i| (0..labels.len()).map(|j| confusion.counts[[i, j]]).collect())
        .collect();
    let svg = heatmap("State-count classification", &labels, &matrix);
    write_path(config, &format!("{stem}.svg"), |p| {
        stage("classify", atomic_write(p, svg.as_bytes()))
    })
}

fn classification_config(config: &PipelineConfig) -> ClassificationConfig {
    ClassificationConfig {
        class_values: config.class_values.clone(),
        train_per_class: config.train_per_class,
        test_per_class: config.test_per_class,
        q_count: config.q_count,
        t_star: config.t_star,
        h_max: config.h_max,
        gamma_max: config.gamma_max,
        coupling_case_id: config.coupling_case_ids[0],
        geometry: geometry(config),
        k_values: config.knn_k_values.clone(),
        train_seed: config.classify_train_seed,
        test_seed: config.classify_test_seed,
    }
}

fn report_classification(config: &PipelineConfig, outcome: &ClassificationOutcome) -> CmdResult {
    let mut rows: Vec<Vec<String>> = outcome
        .per_k
        .iter()
        .map(|ka| {
            vec![
                ka.k.to_string(),
                csv_f64(ka.accuracy),
                csv_f64(ka.stderr),
                (ka.k == outcome.best_k).to_string(),
            ]
        })
        .collect();
    rows.sort_by_key(|r| r[0].parse::<usize>().unwrap());
    write_path(config, "classification_summary.csv", |p| {
        stage("classify", write_csv(p, &["k", "accuracy", "stderr", "best"], &rows))
    })?;
    write_confusion(config, &outcome.best.confusion, "confusion")?;
    println!(
        "classification: best k = {} with accuracy {:.4} +/- {:.4} ({} train, {} test)",
        outcome.best_k,
        outcome.best.accuracy,
        outcome.best.stderr,
        outcome.train_size,
        outcome.test_size
    );
    Ok(())
}

pub fn cmd_classify(config: &PipelineConfig) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    let outcome = stage("classify", run_classification_experiment(&classification_config(config)))?;
    report_classification(config, &outcome)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn write_loss_history(config: &PipelineConfig, history: &[EpochLoss]) -> CmdResult {
    let rows: Vec<Vec<String>> = history
        .iter()
        .enumerate()
        .map(|(e, l)| vec![e.to_string(), csv_f64(l.train_mse), csv_f64(l.val_mse)])
        .collect();
    write_path(config, "loss_history.csv", |p| {
        stage("train", write_csv(p, &["epoch", "train_mse", "val_mse"], &rows))
    })
}

pub fn cmd_train(
    config: &PipelineConfig,
    data: Option<PathBuf>,
    checkpoint_out: Option<PathBuf>,
) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    let data_path = data.unwrap_or_else(|| dataset_path(config, DataRole::Train));
    let dataset = stage("train", load_dataset(&data_path))?;
    let (checkpoint, history, best_epoch) = stage(
        "train",
        train_mlp_on_dataset(&dataset, &config.hidden_dims, &train_config(config)),
    )?;
    let out = checkpoint_out.unwrap_or_else(|| checkpoint_path(config));
    stage("train", checkpoint_save(&checkpoint, &out))?;
    write_loss_history(config, &history)?;
    println!(
        "trained on {} records for {} epochs; best validation at epoch {best_epoch}; checkpoint {}",
        dataset.records.len(),
        history.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn report_rows(report: &RegressionReport) -> Vec<Vec<String>> {
    vec![
        vec!["record_count".into(), report.record_count.to_string()],
        vec!["mre_h".into(), csv_f64(report.mre_h)],
        vec!["mre_gamma".into(), csv_f64(report.mre_gamma)],
        vec!["restricted_mre_h".into(), csv_f64(report.restricted_mre_h)],
        vec!["restricted_mre_gamma".into(), csv_f64(report.restricted_mre_gamma)],
        vec!["mae_h_mhz".into(), csv_f64(report.mae_h)],
        vec!["mae_gamma_mhz".into(), csv_f64(report.mae_gamma)],
        vec!["zero_actual_excluded".into(), report.zero_actual_excluded.to_string()],
        vec!["restricted_skipped_h".into(), report.restricted_skipped_h.to_string()],
        vec!["restricted_skipped_gamma".into(), report.restricted_skipped_gamma.to_string()],
    ]
}

fn write_binned(config: &PipelineConfig, report: &RegressionReport, stem: &str) -> CmdResult {
    for (name, bins) in [("h", &report.binned_h), ("gamma", &report.binned_gamma)] {
        let rows: Vec<Vec<String>> = bins
            .iter()
            .map(|b| {
                vec![
                    csv_f64(b.lo),
                    csv_f64(b.hi),
                    b.count.to_string(),
                    csv_f64(b.mre),
                    csv_f64(b.mae),
                ]
            })
            .collect();
        write_path(config, &format!("{stem}_binned_{name}.csv"), |p| {
            stage("eval", write_csv(p, &["lo_mhz", "hi_mhz", "count", "mre", "mae"], &rows))
        })?;
    }
    let labels: Vec<String> = report
        .binned_h
        .iter()
        .map(|b| format!("{:.2}-{:.2}", b.lo, b.hi))
        .collect();
    let mre_series = vec![
        ("H".to_string(), report.binned_h.iter().map(|b| b.mre).collect::<Vec<f64>>()),
        ("Gamma".to_string(), report.binned_gamma.iter().map(|b| b.mre).collect::<Vec<f64>>()),
    ];
    let svg = bar_chart("Relative error vs actual value", "actual value bin (MHz)", "MRE", &labels, &mre_series);
    write_path(config, &format!("{stem}_binned_mre.svg"), |p| {
        stage("eval", atomic_write(p, svg.as_bytes()))
    })?;
    let mae_series = vec![
        ("H".to_string(), report.binned_h.iter().map(|b| b.mae).collect::<Vec<f64>>()),
        ("Gamma".to_string(), report.binned_gamma.iter().map(|b| b.mae).collect::<Vec<f64>>()),
    ];
    let svg = bar_chart("Absolute error vs actual value", "actual value bin (MHz)", "MAE (MHz)", &labels, &mae_series);
    write_path(config, &format!("{stem}_binned_mae.svg"), |p| {
        stage("eval", atomic_write(p, svg.as_bytes()))
    })
}

pub fn cmd_eval(
    config: &PipelineConfig,
    checkpoint: Option<PathBuf>,
    data: Option<PathBuf>,
) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    let cp_path = checkpoint.unwrap_or_else(|| checkpoint_path(config));
    let data_path = data.unwrap_or_else(|| dataset_path(config, DataRole::Test));
    let checkpoint = stage("eval", checkpoint_load(&cp_path))?;
    let dataset = stage("eval", load_dataset(&data_path))?;
    let gamma_cap = dataset.spec.gamma_mean_override.map(|g| 2.0 * g).unwrap_or(dataset.spec.gamma_max);
    let (report, per_case) = stage("eval", evaluate_checkpoint(&checkpoint, &dataset, gamma_cap))?;
    write_path(config, "regression_report.csv", |p| {
        stage("eval", write_csv(p, &["metric", "value"], &report_rows(&report)))
    })?;
    write_binned(config, &report, "regression")?;
    if !per_case.is_empty() {
        let rows: Vec<Vec<String>> = per_case
            .iter()
            .map(|(case, r)| {
                vec![
                    case.to_string(),
                    csv_f64(r.restricted_mre_h),
                    csv_f64(r.restricted_mre_gamma),
                    csv_f64(r.mre_h),
                    csv_f64(r.mre_gamma),
                ]
            })
            .collect();
        write_path(config, "regression_per_case.csv", |p| {
            stage(
                "eval",
                write_csv(
                    p,
                    &["case_id", "restricted_mre_h", "restricted_mre_gamma", "mre_h", "mre_gamma"],
                    &rows,
                ),
            )
        })?;
    }
    println!(
        "eval: restricted MRE(H) = {:.4}, restricted MRE(Gamma) = {:.4} over {} records",
        report.restricted_mre_h, report.restricted_mre_gamma, report.record_count
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep-dephasing
// ---------------------------------------------------------------------------

pub fn cmd_sweep_dephasing(config: &PipelineConfig) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    let base = regression_config(config);
    let sweep = stage("sweep-dephasing", run_dephasing_sweep(&base, &config.gamma_bar_grid))?;
    let rows: Vec<Vec<String>> = sweep
        .points
        .iter()
        .map(|p| {
            vec![
                csv_f64(p.gamma_bar),
                csv_f64(p.report.restricted_mre_h),
                csv_f64(p.report.restricted_mre_gamma),
                csv_f64(p.report.mre_h),
                csv_f64(p.report.mre_gamma),
                csv_f64(p.report.mae_h),
                csv_f64(p.report.mae_gamma),
            ]
        })
        .collect();
    write_path(config, "sweep_dephasing.csv", |p| {
        stage(
            "sweep-dephasing",
            write_csv(
                p,
                &[
                    "gamma_bar_mhz",
                    "restricted_mre_h",
                    "restricted_mre_gamma",
                    "mre_h",
                    "mre_gamma",
                    "mae_h_mhz",
                    "mae_gamma_mhz",
                ],
                &rows,
            ),
        )
    })?;
    let series = vec![
        Series {
            label: "MRE(H)".into(),
            points: sweep.points.iter().map(|p| (p.gamma_bar, p.report.restricted_mre_h)).collect(),
        },
        Series {
            label: "MRE(Gamma)".into(),
            points: sweep
                .points
                .iter()
                .map(|p| (p.gamma_bar, p.report.restricted_mre_gamma))
                .collect(),
        },
    ];
    let svg = line_chart(
        "Regression error vs mean dephasing rate",
        "mean dephasing rate (MHz)",
        "restricted MRE",
        &series,
        true,
        true,
    );
    write_path(config, "sweep_dephasing.svg", |p| {
        stage("sweep-dephasing", atomic_write(p, svg.as_bytes()))
    })?;
    for point in &sweep.points {
        println!(
            "gamma_bar = {:>8.1} MHz: restricted MRE(H) = {:.4}, restricted MRE(Gamma) = {:.4}",
            point.gamma_bar, point.report.restricted_mre_h, point.report.restricted_mre_gamma
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// case-study
// ---------------------------------------------------------------------------

fn write_case_study(config: &PipelineConfig, study: &CaseStudyReport) -> CmdResult {
    let rows: Vec<Vec<String>> = study
        .per_case
        .iter()
        .map(|c| {
            vec![
                c.case_id.to_string(),
                csv_f64(c.report.restricted_mre_h),
                csv_f64(c.report.restricted_mre_gamma),
                csv_f64(c.report.mre_h),
                csv_f64(c.report.mre_gamma),
            ]
        })
        .collect();
    write_path(config, "case_study_per_case.csv", |p| {
        stage(
            "case-study",
            write_csv(
                p,
                &["case_id", "restricted_mre_h", "restricted_mre_gamma", "mre_h", "mre_gamma"],
                &rows,
            ),
        )
    })?;

    let mut mixed_rows: Vec<Vec<String>> = vec![
        ("mixture", &study.mixed_full),
        ("seen_iv_vi", &study.mixed_seen),
        ("unseen_i_iii", &study.mixed_unseen),
    ]
    .into_iter()
    .map(|(name, r)| {
        vec![
            name.to_string(),
            csv_f64(r.restricted_mre_h),
            csv_f64(r.restricted_mre_gamma),
            csv_f64(r.mre_h),
            csv_f64(r.mre_gamma),
        ]
    })
    .collect();
    for (case, r) in &study.mixed_per_case {
        mixed_rows.push(vec![
            format!("case_{case}"),
            csv_f64(r.restricted_mre_h),
            csv_f64(r.restricted_mre_gamma),
            csv_f64(r.mre_h),
            csv_f64(r.mre_gamma),
        ]);
    }
    write_path(config, "case_study_mixed.csv", |p| {
        stage(
            "case-study",
            write_csv(
                p,
                &["subset", "restricted_mre_h", "restricted_mre_gamma", "mre_h", "mre_gamma"],
                &mixed_rows,
            ),
        )
    })?;

    let labels: Vec<String> = study.per_case.iter().map(|c| format!("case {}", c.case_id)).collect();
    let series = vec![
        (
            "MRE(H)".to_string(),
            study.per_case.iter().map(|c| c.report.restricted_mre_h).collect::<Vec<f64>>(),
        ),
        (
            "MRE(Gamma)".to_string(),
            study.per_case.iter().map(|c| c.report.restricted_mre_gamma).collect::<Vec<f64>>(),
        ),
    ];
    let svg = bar_chart(
        "Per-case regression error",
        "coupling case",
        "restricted MRE",
        &labels,
        &series,
    );
    write_path(config, "case_study_per_case.svg", |p| {
        stage("case-study", atomic_write(p, svg.as_bytes()))
    })
}

pub fn cmd_case_study(config: &PipelineConfig) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    let base = regression_config(config);
    let study = stage("case-study", run_coupling_case_study(&base, None))?;
    write_case_study(config, &study)?;
    for c in &study.per_case {
        println!("case {}: restricted MRE(H) = {:.4}", c.case_id, c.report.restricted_mre_h);
    }
    println!(
        "mixed training (cases 4-6): mixture MRE(H) = {:.4}, seen = {:.4}, unseen = {:.4}",
        study.mixed_full.restricted_mre_h,
        study.mixed_seen.restricted_mre_h,
        study.mixed_unseen.restricted_mre_h
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// trajectory
// ---------------------------------------------------------------------------

pub fn cmd_trajectory(config: &PipelineConfig) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    let mut rng = record_rng(config.trajectory_seed, 0);
    let model = match config.gamma_bar {
        Some(gb) => sample_model_with_mean_gamma(&mut rng, config.n_states, config.h_max, gb),
        None => sample_model(&mut rng, config.n_states, config.h_max, config.gamma_max),
    };
    let spec = realization_spec(config, DataRole::Train);
    let case = stage("trajectory", spec.coupling_case(config.coupling_case_ids[0]))?;
    let set = stage(
        "trajectory",
        generate_coupling_set(&case, config.n_states, config.q_count),
    )?;
    if config.trajectory_q_index >= set.q_count {
        return Err(CliError::Config(format!(
            "trajectory_q_index {} out of range for Q = {}",
            config.trajectory_q_index, set.q_count
        )));
    }
    let row = set.row(config.trajectory_q_index);
    let rho0 = stage(
        "trajectory",
        DensityMatrix::pure_basis(config.n_states + 1, initial_state_index(config.n_states)),
    )?;
    let grid: Vec<f64> = (0..config.trajectory_steps)
        .map(|k| config.trajectory_t_max * k as f64 / (config.trajectory_steps - 1) as f64)
        .collect();
    let traj = stage(
        "trajectory",
        populations_trajectory(&model, &row, &rho0, &grid),
    )?;

    let header: Vec<String> = std::iter::once("t_us".to_string())
        .chain((0..config.n_states).map(|n| format!("p_{n}")))
        .chain(std::iter::once("p_out".to_string()))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(k, t)| {
            std::iter::once(csv_f64(*t))
                .chain((0..=config.n_states).map(|i| csv_f64(traj[[k, i]])))
                .collect()
        })
        .collect();
    write_path(config, "trajectory.csv", |p| {
        stage("trajectory", write_csv(p, &header_refs, &rows))
    })?;

    let mut series: Vec<Series> = (0..config.n_states)
        .map(|n| Series {
            label: format!("P_{n}"),
            points: grid.iter().enumerate().map(|(k, t)| (*t, traj[[k, n]])).collect(),
        })
        .collect();
    series.push(Series {
        label: "P_out".into(),
        points: grid
            .iter()
            .enumerate()
            .map(|(k, t)| (*t, traj[[k, config.n_states]]))
            .collect(),
    });
    let svg = line_chart(
        "Population evolution",
        "t (us)",
        "population",
        &series,
        false,
        false,
    );
    write_path(config, "trajectory.svg", |p| {
        stage("trajectory", atomic_write(p, svg.as_bytes()))
    })?;
    println!("trajectory written for N = {} over {} time points", config.n_states, grid.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// full pipeline
// ---------------------------------------------------------------------------

pub fn cmd_full_pipeline(config: &PipelineConfig) -> CmdResult {
    ensure_out_dir(&config.out_dir)?;
    println!("[1/6] coupling sets");
    cmd_gen_couplings(config)?;
    println!("[2/6] state-count classification");
    cmd_classify(config)?;
    println!("[3/6] datasets (N = {})", config.n_states);
    let train_path = dataset_path(config, DataRole::Train);
    let test_path = dataset_path(config, DataRole::Test);
    cmd_gen_data(config, DataRole::Train, Some(train_path.clone()))?;
    cmd_gen_data(config, DataRole::Test, Some(test_path.clone()))?;
    println!("[4/6] regression training");
    cmd_train(config, Some(train_path), None)?;
    println!("[5/6] evaluation");
    cmd_eval(config, None, Some(test_path))?;
    println!("[6/6] trajectory");
    cmd_trajectory(config)?;
    println!("pipeline complete; artifacts in {}", config.out_dir.display());
    Ok(())
}
