//! Flat key-value pipeline configuration.
//!
//! Every tunable of the pipeline lives in one TOML file with documented
//! defaults (see configs/default.toml). Unknown keys are rejected;
//! command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    // Protocol / dataset
    pub n_states: usize,
    pub q_count: usize,
    pub t_star: f64,
    pub h_max: f64,
    pub gamma_max: f64,
    /// Mean dephasing override: rates drawn Uniform(0, 2*gamma_bar).
    pub gamma_bar: Option<f64>,
    pub record_count: usize,
    pub test_record_count: usize,
    pub master_seed: u64,
    pub test_master_seed: u64,

    // Coupling geometry and case selection
    pub coupling_case_ids: Vec<u32>,
    pub test_coupling_case_ids: Vec<u32>,
    pub coupling_j: f64,
    pub coupling_r_min: f64,
    pub coupling_r_max: f64,
    pub coupling_seed: u64,

    // Classification
    pub class_values: Vec<u32>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub knn_k_values: Vec<usize>,
    pub classify_train_seed: u64,
    pub classify_test_seed: u64,

    // Regression network
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub train_seed: u64,

    // Dephasing sweep
    pub gamma_bar_grid: Vec<f64>,

    // Trajectory rendering
    pub trajectory_t_max: f64,
    pub trajectory_steps: usize,
    pub trajectory_q_index: usize,
    pub trajectory_seed: u64,

    // Execution
    /// 0 means all available cores.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_states: 3,
            q_count: 200,
            t_star: 0.15,
            h_max: 1.0,
            gamma_max: 1.0,
            gamma_bar: None,
            record_count: 10_000,
            test_record_count: 1_000,
            master_seed: 30_001,
            test_master_seed: 40_001,
            coupling_case_ids: vec![3],
            test_coupling_case_ids: vec![3],
            coupling_j: 50.0,
            coupling_r_min: 0.5,
            coupling_r_max: 3.0,
            coupling_seed: 9_001,
            class_values: vec![2, 3, 4, 5],
            train_per_class: 2_500,
            test_per_class: 300,
            knn_k_values: vec![1, 3, 5, 7],
            classify_train_seed: 10_001,
            classify_test_seed: 20_001,
            hidden_dims: vec![1024, 512, 256],
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 1000,
            validation_fraction: 0.1,
            train_seed: 4242,
            gamma_bar_grid: vec![0.1, 1.0, 10.0, 100.0, 1000.0, 10_000.0],
            trajectory_t_max: 1.0,
            trajectory_steps: 120,
            trajectory_q_index: 0,
            trajectory_seed: 501,
            workers: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n_states < 1 {
            return bad("n_states must be >= 1".into());
        }
        if self.q_count < 1 {
            return bad("q_count must be >= 1".into());
        }
        if !(self.t_star > 0.0) {
            return bad("t_star must be positive".into());
        }
        if !(self.h_max > 0.0) || !(self.gamma_max > 0.0) {
            return bad("h_max and gamma_max must be positive".into());
        }
        if self.record_count < 1 || self.test_record_count < 1 {
            return bad("record counts must be >= 1".into());
        }
        if self.coupling_case_ids.is_empty() || self.test_coupling_case_ids.is_empty() {
            return bad("coupling case lists must be non-empty".into());
        }
        for id in self.coupling_case_ids.iter().chain(&self.test_coupling_case_ids) {
            if !(1..=6).contains(id) {
                return bad(format!("coupling case id {id} not in 1..=6"));
            }
        }
        if self.class_values.is_empty() || self.knn_k_values.is_empty() {
            return bad("class_values and knn_k_values must be non-empty".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must be in (0,1)".into());
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if self.trajectory_steps < 2 || !(self.trajectory_t_max > 0.0) {
            return bad("trajectory needs t_max > 0 and at least 2 steps".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = toml::from_str::<PipelineConfig>("bogus_key = 1").unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn partial_files_keep_defaults() {
        let config: PipelineConfig = toml::from_str("n_states = 4\nepochs = 10").unwrap();
        assert_eq!(config.n_states, 4);
        assert_eq!(config.epochs, 10);
        assert_eq!(config.q_count, 200);
    }
}
