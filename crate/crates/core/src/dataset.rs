//! Sampling of ground-truth models, the measurement protocol, and the
//! JSON-lines dataset format.
//!
//! A dataset is a pure function of its `RealizationSpec`: every record draws
//! from a generator derived from (master_seed, record_id), so the file is
//! byte-identical regardless of worker count.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{generate_coupling_set, CouplingCase};
use crate::error::{CoreError, Result};
use crate::fsio::{atomic_write, fmt_f64, push_f64_slice};
use crate::lindblad::{
    assemble_hamiltonian, build_liouvillian, output_population, propagate_expm, DensityMatrix,
    EffectiveModel, OutputCouplingSet,
};
use crate::rng::record_rng;

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Everything needed to reproduce a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationSpec {
    pub n_states: usize,
    pub q_count: usize,
    /// Measurement time, us.
    pub t_star: f64,
    /// Upper bound of the uniform Hamiltonian entries, MHz.
    pub h_max: f64,
    /// Upper bound of the uniform dephasing rates, MHz.
    pub gamma_max: f64,
    /// When set, dephasing rates are drawn Uniform(0, 2*value) so the
    /// ensemble mean equals this value (MHz).
    pub gamma_mean_override: Option<f64>,
    /// Coupling case per record, assigned round-robin.
    pub coupling_case_ids: Vec<u32>,
    pub coupling_j: f64,
    pub coupling_r_min: f64,
    pub coupling_r_max: f64,
    pub coupling_seed: u64,
    pub master_seed: u64,
    pub record_count: usize,
}

impl RealizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_states < 1 {
            return Err(CoreError::invalid("n_states must be >= 1"));
        }
        if self.q_count < 1 {
            return Err(CoreError::invalid("q_count must be >= 1"));
        }
        if !(self.t_star.is_finite() && self.t_star > 0.0) {
            return Err(CoreError::invalid("t_star must be positive"));
        }
        if !(self.h_max.is_finite() && self.h_max > 0.0) {
            return Err(CoreError::invalid("h_max must be positive"));
        }
        if !(self.gamma_max.is_finite() && self.gamma_max > 0.0) {
            return Err(CoreError::invalid("gamma_max must be positive"));
        }
        if let Some(gb) = self.gamma_mean_override {
            if !(gb.is_finite() && gb > 0.0) {
                return Err(CoreError::invalid("gamma_mean_override must be positive"));
            }
        }
        if self.record_count < 1 {
            return Err(CoreError::invalid("record_count must be >= 1"));
        }
        if self.coupling_case_ids.is_empty() {
            return Err(CoreError::invalid("coupling_case_ids must be non-empty"));
        }
        for id in &self.coupling_case_ids {
            self.coupling_case(*id)?.validate()?;
        }
        Ok(())
    }

    /// The coupling case parameters for one case id (alpha == id).
    pub fn coupling_case(&self, case_id: u32) -> Result<CouplingCase> {
        if !(1..=6).contains(&case_id) {
            return Err(CoreError::invalid(format!("coupling case id {case_id} not in 1..=6")));
        }
        Ok(CouplingCase {
            alpha: case_id,
            j_strength: self.coupling_j,
            r_min: self.coupling_r_min,
            r_max: self.coupling_r_max,
            seed: self.coupling_seed,
        })
    }
}

/// One training/test example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub record_id: u64,
    pub coupling_case_id: u32,
    /// Row-major N*N Hamiltonian label, MHz.
    pub label_h: Vec<f64>,
    /// N dephasing-rate labels, MHz.
    pub label_gamma: Vec<f64>,
    /// Output population per tuning index, length Q, each in [0,1].
    pub features: Vec<f64>,
}

/// A dataset: spec, the coupling sets shared by all records, and the records.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub spec: RealizationSpec,
    /// (case_id, set) pairs in first-use order.
    pub coupling_sets: Vec<(u32, OutputCouplingSet)>,
    pub records: Vec<Record>,
}

impl DatasetFile {
    pub fn coupling_set(&self, case_id: u32) -> Option<&OutputCouplingSet> {
        self.coupling_sets
            .iter()
            .find(|(id, _)| *id == case_id)
            .map(|(_, set)| set)
    }
}

/// Draw a ground-truth model: upper triangle (including diagonal) uniform in
/// [0, h_max) mirrored into a symmetric block, rates uniform in [0, gamma_max).
pub fn sample_model<R: Rng>(
    rng: &mut R,
    n_states: usize,
    h_max: f64,
    gamma_max: f64,
) -> EffectiveModel {
    let mut h = Array2::<f64>::zeros((n_states, n_states));
    for i in 0..n_states {
        for j in i..n_states {
            let v = if h_max > 0.0 { rng.gen_range(0.0..h_max) } else { 0.0 };
            h[[i, j]] = v;
            h[[j, i]] = v;
        }
    }
    let gamma = (0..n_states)
        .map(|_| if gamma_max > 0.0 { rng.gen_range(0.0..gamma_max) } else { 0.0 })
        .collect();
    EffectiveModel { n_states, h, gamma }
}

/// As `sample_model`, but rates uniform in [0, 2*gamma_bar) so the ensemble
/// mean dephasing rate equals gamma_bar.
pub fn sample_model_with_mean_gamma<R: Rng>(
    rng: &mut R,
    n_states: usize,
    h_max: f64,
    gamma_bar: f64,
) -> EffectiveModel {
    sample_model(rng, n_states, h_max, 2.0 * gamma_bar)
}

/// Index of the initial state: |1> when the black box has one, else |0>.
pub fn initial_state_index(n_states: usize) -> usize {
    1.min(n_states.saturating_sub(1))
}

/// Run the measurement protocol for one model: for each tuning index q,
/// propagate the initial state to t_star under the coupling row q and read
/// the output population.
pub fn generate_record(
    model: &EffectiveModel,
    coupling_set: &OutputCouplingSet,
    t_star: f64,
) -> Result<Vec<f64>> {
    if coupling_set.n_states() != model.n_states {
        return Err(CoreError::invalid(format!(
            "coupling set has {} states, model has {}",
            coupling_set.n_states(),
            model.n_states
        )));
    }
    let dim = model.n_states + 1;
    let rho0 = DensityMatrix::pure_basis(dim, initial_state_index(model.n_states))?;
    let mut features = Vec::with_capacity(coupling_set.q_count);
    for q in 0..coupling_set.q_count {
        let row = coupling_set.row(q);
        let full_h = assemble_hamiltonian(model, &row)?;
        let liou = build_liouvillian(&full_h, &model.gamma)?;
        let rho = propagate_expm(&liou, &rho0, t_star)?;
        features.push(output_population(&rho)?);
    }
    Ok(features)
}

fn make_record(
    spec: &RealizationSpec,
    sets: &[(u32, OutputCouplingSet)],
    index: usize,
) -> Result<Record> {
    let mut rng = record_rng(spec.master_seed, index as u64);
    let model = match spec.gamma_mean_override {
        Some(gamma_bar) => {
            sample_model_with_mean_gamma(&mut rng, spec.n_states, spec.h_max, gamma_bar)
        }
        None => sample_model(&mut rng, spec.n_states, spec.h_max, spec.gamma_max),
    };
    let case_id = spec.coupling_case_ids[index % spec.coupling_case_ids.len()];
    let set = &sets
        .iter()
        .find(|(id, _)| *id == case_id)
        .expect("coupling set generated for every listed case")
        .1;
    let features = generate_record(&model, set, spec.t_star)
        .map_err(|e| CoreError::invariant(format!("record {index}: {e}")))?;
    Ok(Record {
        record_id: index as u64,
        coupling_case_id: case_id,
        label_h: model.h.iter().cloned().collect(),
        label_gamma: model.gamma.clone(),
        features,
    })
}

/// Generate all records of a spec. Records are an order-preserving parallel
/// map over the record index; the output does not depend on worker count.
pub fn generate_dataset(spec: &RealizationSpec) -> Result<DatasetFile> {
    spec.validate()?;
    let mut sets: Vec<(u32, OutputCouplingSet)> = Vec::new();
    for id in &spec.coupling_case_ids {
        if sets.iter().any(|(seen, _)| seen == id) {
            continue;
        }
        let case = spec.coupling_case(*id)?;
        sets.push((*id, generate_coupling_set(&case, spec.n_states, spec.q_count)?));
    }
    let records: Result<Vec<Record>> = (0..spec.record_count)
        .into_par_iter()
        .map(|i| make_record(spec, &sets, i))
        .collect();
    Ok(DatasetFile { spec: spec.clone(), coupling_sets: sets, records: records? })
}

fn write_spec_json(out: &mut String, spec: &RealizationSpec) {
    out.push_str(&format!(
        "{{\"n_states\":{},\"q_count\":{},\"t_star\":{},\"h_max\":{},\"gamma_max\":{},",
        spec.n_states,
        spec.q_count,
        fmt_f64(spec.t_star),
        fmt_f64(spec.h_max),
        fmt_f64(spec.gamma_max),
    ));
    match spec.gamma_mean_override {
        Some(v) => out.push_str(&format!("\"gamma_mean_override\":{},", fmt_f64(v))),
        None => out.push_str("\"gamma_mean_override\":null,"),
    }
    out.push_str("\"coupling_case_ids\":[");
    for (i, id) in spec.coupling_case_ids.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&id.to_string());
    }
    out.push_str(&format!(
        "],\"coupling_j\":{},\"coupling_r_min\":{},\"coupling_r_max\":{},\"coupling_seed\":{},\"master_seed\":{},\"record_count\":{}}}",
        fmt_f64(spec.coupling_j),
        fmt_f64(spec.coupling_r_min),
        fmt_f64(spec.coupling_r_max),
        spec.coupling_seed,
        spec.master_seed,
        spec.record_count,
    ));
}

fn write_record_json(out: &mut String, record: &Record) {
    out.push_str(&format!(
        "{{\"record_id\":{},\"coupling_case_id\":{},\"label_h\":",
        record.record_id, record.coupling_case_id
    ));
    push_f64_slice(out, &record.label_h);
    out.push_str(",\"label_gamma\":");
    push_f64_slice(out, &record.label_gamma);
    out.push_str(",\"features\":");
    push_f64_slice(out, &record.features);
    out.push('}');
}

/// Serialize a dataset as JSON lines: one metadata header line, then one
/// record per line. All floats carry 17 significant digits.
pub fn dataset_to_jsonl(file: &DatasetFile) -> Result<String> {
    for record in &file.records {
        for v in record.features.iter().chain(&record.label_h).chain(&record.label_gamma) {
            if !v.is_finite() {
                return Err(CoreError::numeric(format!(
                    "record {} contains a non-finite value",
                    record.record_id
                )));
            }
        }
    }
    let mut out = String::new();
    out.push_str(&format!("{{\"format_version\":{DATASET_FORMAT_VERSION},\"spec\":"));
    write_spec_json(&mut out, &file.spec);
    out.push_str(",\"coupling_sets\":[");
    for (i, (id, set)) in file.coupling_sets.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{{\"case_id\":{id},\"kappa\":["));
        for q in 0..set.q_count {
            if q > 0 {
                out.push(',');
            }
            push_f64_slice(&mut out, &set.row(q));
        }
        out.push_str("]}");
    }
    out.push_str("]}\n");
    for record in &file.records {
        write_record_json(&mut out, record);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_dataset(file: &DatasetFile, path: &Path) -> Result<()> {
    let contents = dataset_to_jsonl(file)?;
    atomic_write(path, contents.as_bytes())
}

#[derive(Deserialize)]
struct CouplingSetWire {
    case_id: u32,
    kappa: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct HeaderWire {
    spec: RealizationSpec,
    coupling_sets: Vec<CouplingSetWire>,
}

fn parse_err(line: usize, message: impl Into<String>) -> CoreError {
    CoreError::Parse { line, message: message.into() }
}

/// Load and validate a dataset file. Malformed input fails with the 1-based
/// line number; nothing partial is ever returned.
pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header_line = match lines.next() {
        Some(line) => line?,
        None => return Err(parse_err(1, "empty file, expected metadata header")),
    };
    let header_value: serde_json::Value = serde_json::from_str(&header_line)
        .map_err(|e| parse_err(1, format!("invalid header JSON: {e}")))?;
    let version = header_value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| parse_err(1, "header missing format_version"))?;
    if version != DATASET_FORMAT_VERSION as u64 {
        return Err(CoreError::VersionMismatch {
            found: version as u32,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let header: HeaderWire = serde_json::from_value(header_value)
        .map_err(|e| parse_err(1, format!("invalid header: {e}")))?;
    header.spec.validate()?;

    let n = header.spec.n_states;
    let q = header.spec.q_count;
    let mut coupling_sets = Vec::with_capacity(header.coupling_sets.len());
    for wire in header.coupling_sets {
        if wire.kappa.len() != q || wire.kappa.iter().any(|row| row.len() != n) {
            return Err(parse_err(
                1,
                format!("coupling set {} does not match declared Q={q}, N={n}", wire.case_id),
            ));
        }
        let mut kappa = Array2::<f64>::zeros((q, n));
        for (qi, row) in wire.kappa.iter().enumerate() {
            for (ni, v) in row.iter().enumerate() {
                kappa[[qi, ni]] = *v;
            }
        }
        coupling_sets.push((wire.case_id, OutputCouplingSet::new(kappa)?));
    }

    let mut records = Vec::new();
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let line = line?;
        if line.trim().is_empty() {
            return Err(parse_err(line_no, "blank line inside record section"));
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| parse_err(line_no, format!("invalid record: {e}")))?;
        validate_record(&record, n, q).map_err(|e| parse_err(line_no, e.to_string()))?;
        records.push(record);
    }

    Ok(DatasetFile { spec: header.spec, coupling_sets, records })
}

fn validate_record(record: &Record, n: usize, q: usize) -> Result<()> {
    if record.label_h.len() != n * n {
        return Err(CoreError::invariant(format!(
            "record {}: label_h has {} entries, expected {}",
            record.record_id,
            record.label_h.len(),
            n * n
        )));
    }
    if record.label_gamma.len() != n {
        return Err(CoreError::invariant(format!(
            "record {}: label_gamma has {} entries, expected {n}",
            record.record_id,
            record.label_gamma.len()
        )));
    }
    if record.features.len() != q {
        return Err(CoreError::invariant(format!(
            "record {}: features has {} entries, expected {q}",
            record.record_id,
            record.features.len()
        )));
    }
    for v in record.features.iter() {
        if !v.is_finite() || *v < 0.0 || *v > 1.0 {
            return Err(CoreError::invariant(format!(
                "record {}: feature value {v} outside [0,1]",
                record.record_id
            )));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if record.label_h[i * n + j] != record.label_h[j * n + i] {
                return Err(CoreError::invariant(format!(
                    "record {}: label_h not symmetric at ({i},{j})",
                    record.record_id
                )));
            }
        }
    }
    Ok(())
}
