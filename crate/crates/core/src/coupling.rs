//! Reproducible families of output-coupling sets.
//!
//! Each family places the black-box states on a fictitious 1-D chain at
//! x_n = n, puts the output state a random distance beyond the last state,
//! and sets kappa = j / distance^alpha. The exponent alpha in 1..=6 indexes
//! the six cases; larger alpha gives a wider, more skewed spread.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::lindblad::OutputCouplingSet;
use crate::rng::stream_rng;

pub const DEFAULT_J_STRENGTH: f64 = 50.0;
pub const DEFAULT_R_MIN: f64 = 0.5;
pub const DEFAULT_R_MAX: f64 = 3.0;

/// One of the six coupling families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCase {
    /// Power-law exponent, 1..=6; doubles as the case index.
    pub alpha: u32,
    /// Interaction strength j, MHz * (length unit)^alpha.
    pub j_strength: f64,
    /// Bounds of the uniform output-state displacement, length units.
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl CouplingCase {
    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.alpha) {
            return Err(CoreError::invalid(format!(
                "alpha must be in 1..=6, got {}",
                self.alpha
            )));
        }
        if !(self.j_strength.is_finite() && self.j_strength > 0.0) {
            return Err(CoreError::invalid("j_strength must be positive and finite"));
        }
        if !(self.r_min.is_finite() && self.r_max.is_finite())
            || self.r_min <= 0.0
            || self.r_min >= self.r_max
        {
            return Err(CoreError::invalid(format!(
                "need 0 < r_min < r_max, got r_min={}, r_max={}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }
}

/// Spread statistics of a coupling set, matching the quantities quoted for
/// the six case histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingStats {
    /// Sample standard deviation over all Q*N entries, MHz.
    pub sigma: f64,
    /// Third central moment, MHz^3.
    pub mu3_central: f64,
    /// mu3 / sigma^3, dimensionless (0 for a constant set).
    pub skew_standardized: f64,
}

/// kappa = j / distance^alpha.
pub fn power_law_coupling(j_strength: f64, distance: f64, alpha: u32) -> f64 {
    j_strength / distance.powi(alpha as i32)
}

/// Generate the Q x N coupling matrix for one case.
///
/// State n sits at x_n = n; for each tuning index q the output state sits at
/// x_out = (N-1) + u_q with u_q ~ Uniform(r_min, r_max) drawn from the
/// case-seeded generator. Deterministic: identical (case, n_states, q_count)
/// inputs give a bitwise-identical matrix.
pub fn generate_coupling_set(
    case: &CouplingCase,
    n_states: usize,
    q_count: usize,
) -> Result<OutputCouplingSet> {
    case.validate()?;
    if n_states < 1 || q_count < 1 {
        return Err(CoreError::invalid(format!(
            "need n_states >= 1 and q_count >= 1, got {n_states}, {q_count}"
        )));
    }
    let mut rng = stream_rng(case.seed, "coupling-offsets");
    let mut kappa = Array2::<f64>::zeros((q_count, n_states));
    for q in 0..q_count {
        let offset: f64 = rng.gen_range(case.r_min..case.r_max);
        let x_out = (n_states - 1) as f64 + offset;
        for n in 0..n_states {
            let distance = x_out - n as f64;
            kappa[[q, n]] = power_law_coupling(case.j_strength, distance, case.alpha);
        }
    }
    OutputCouplingSet::new(kappa)
}

/// Spread statistics over all entries of a coupling set.
pub fn coupling_stats(set: &OutputCouplingSet) -> Result<CouplingStats> {
    let values: Vec<f64> = set.kappa.iter().cloned().collect();
    let count = values.len();
    if count < 2 {
        return Err(CoreError::invalid("need at least 2 coupling entries for statistics"));
    }
    let n = count as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();
    let mu3_central = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let skew_standardized = if sigma > 0.0 { mu3_central / sigma.powi(3) } else { 0.0 };
    Ok(CouplingStats { sigma, mu3_central, skew_standardized })
}
