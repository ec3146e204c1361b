//! Dense propagation of an (N+1)-state open system.
//!
//! The model is N "black box" states |0..N-1> plus one measurable output
//! state |out>, evolving under a Lindblad master equation with a real
//! symmetric Hamiltonian block, a tunable coupling row between the black box
//! and |out>, and diagonal dephasing operators G_n |n><n| acting on the
//! black-box states only.
//!
//! Unit convention: energies and rates are labelled MHz and times are in
//! microseconds; a value of 1 MHz contributes a phase of 1 rad per us (no
//! 2*pi factor). Dephasing operators enter the dissipator as written, so a
//! rate G produces coherence decay at G^2/2.

use ndarray::{Array1, Array2};

use crate::error::{CoreError, Result};
use crate::linalg::{self, C64};

/// Tolerances for the density-matrix invariants.
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const TRACE_IMAG_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = -1e-8;
const POPULATION_CLAMP_TOL: f64 = 1e-9;

/// Ground-truth label: the symmetric Hamiltonian block (MHz) and the
/// dephasing rates (MHz) of the N black-box states.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveModel {
    pub n_states: usize,
    /// Real symmetric N x N block, row-major, MHz.
    pub h: Array2<f64>,
    /// Dephasing rate per black-box state, MHz.
    pub gamma: Vec<f64>,
}

impl EffectiveModel {
    pub fn new(h: Array2<f64>, gamma: Vec<f64>) -> Result<Self> {
        let n = h.nrows();
        if n == 0 || h.ncols() != n {
            return Err(CoreError::invalid(format!(
                "hamiltonian block must be square and non-empty, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if gamma.len() != n {
            return Err(CoreError::invalid(format!(
                "expected {n} dephasing rates, got {}",
                gamma.len()
            )));
        }
        let model = EffectiveModel { n_states: n, h, gamma };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states;
        for i in 0..n {
            for j in 0..n {
                let v = self.h[[i, j]];
                if !v.is_finite() {
                    return Err(CoreError::numeric("non-finite Hamiltonian entry"));
                }
                if v < 0.0 {
                    return Err(CoreError::invariant(format!(
                        "negative Hamiltonian entry h[{i}][{j}] = {v}"
                    )));
                }
                if (v - self.h[[j, i]]).abs() > 0.0 {
                    return Err(CoreError::invariant(format!(
                        "hamiltonian block not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        for (i, g) in self.gamma.iter().enumerate() {
            if !g.is_finite() {
                return Err(CoreError::numeric("non-finite dephasing rate"));
            }
            if *g < 0.0 {
                return Err(CoreError::invariant(format!(
                    "negative dephasing rate gamma[{i}] = {g}"
                )));
            }
        }
        Ok(())
    }
}

/// The Q x N matrix of tunable couplings between each black-box state and
/// |out>, fixed once per experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputCouplingSet {
    pub q_count: usize,
    /// Row q holds the coupling of every black-box state for tuning index q, MHz.
    pub kappa: Array2<f64>,
}

impl OutputCouplingSet {
    pub fn new(kappa: Array2<f64>) -> Result<Self> {
        let q_count = kappa.nrows();
        if q_count == 0 || kappa.ncols() == 0 {
            return Err(CoreError::invalid("coupling set must be non-empty"));
        }
        for v in kappa.iter() {
            if !v.is_finite() {
                return Err(CoreError::numeric("non-finite coupling entry"));
            }
            if *v <= 0.0 {
                return Err(CoreError::invariant(format!(
                    "coupling entries must be positive, found {v}"
                )));
            }
        }
        Ok(OutputCouplingSet { q_count, kappa })
    }

    pub fn n_states(&self) -> usize {
        self.kappa.ncols()
    }

    pub fn row(&self, q: usize) -> Vec<f64> {
        self.kappa.row(q).to_vec()
    }
}

/// The full (N+1) x (N+1) real symmetric Hamiltonian in the basis
/// |0>, ..., |N-1>, |out>.
#[derive(Debug, Clone, PartialEq)]
pub struct FullHamiltonian {
    pub dim: usize,
    pub matrix: Array2<f64>,
}

/// Complex Hermitian, unit-trace state of the (N+1)-dimensional system.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: Array2<C64>,
}

impl DensityMatrix {
    /// Pure basis state |index><index|.
    pub fn pure_basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(CoreError::invalid(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut rho = Array2::<C64>::zeros((dim, dim));
        rho[[index, index]] = C64::new(1.0, 0.0);
        Ok(DensityMatrix { rho })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.rho.diag().iter().sum()
    }

    /// Tr(rho^2), real part.
    pub fn purity(&self) -> f64 {
        let sq = linalg::matmul(&self.rho, &self.rho);
        sq.diag().iter().sum::<C64>().re
    }

    /// Checks Hermiticity, unit trace, and positive semidefiniteness at the
    /// documented tolerances.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.rho.ncols() != d {
            return Err(CoreError::invalid("density matrix must be square"));
        }
        let mut herm_dev = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let z = self.rho[[i, j]];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(CoreError::numeric("non-finite density matrix entry"));
                }
                herm_dev = herm_dev.max((z - self.rho[[j, i]].conj()).norm());
            }
        }
        if herm_dev > HERMITICITY_TOL {
            return Err(CoreError::invariant(format!(
                "hermiticity deviation {herm_dev:e} exceeds {HERMITICITY_TOL:e}"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_IMAG_TOL {
            return Err(CoreError::invariant(format!(
                "trace {tr} deviates from unity beyond tolerance"
            )));
        }
        let min_eig = linalg::hermitian_min_eigenvalue(&self.rho);
        if min_eig < POSITIVITY_TOL {
            return Err(CoreError::invariant(format!(
                "minimum eigenvalue {min_eig:e} below {POSITIVITY_TOL:e}"
            )));
        }
        Ok(())
    }

    /// Row-major vectorization (concatenated rows).
    pub fn to_vec(&self) -> Array1<C64> {
        Array1::from_iter(self.rho.iter().cloned())
    }

    pub fn from_vec(v: &Array1<C64>) -> Result<Self> {
        let len = v.len();
        let d = (len as f64).sqrt().round() as usize;
        if d * d != len {
            return Err(CoreError::invalid(format!(
                "vector length {len} is not a perfect square"
            )));
        }
        let rho = Array2::from_shape_vec((d, d), v.to_vec())
            .map_err(|e| CoreError::invalid(e.to_string()))?;
        Ok(DensityMatrix { rho })
    }
}

/// The superoperator M with vec(rho') = M vec(rho), row-major vectorization,
/// units 1/us.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    /// Dimension of the underlying density matrix.
    pub rho_dim: usize,
    /// (rho_dim^2) x (rho_dim^2) complex matrix.
    pub matrix: Array2<C64>,
}

/// Embed the model block and one coupling row into the full Hamiltonian.
pub fn assemble_hamiltonian(
    model: &EffectiveModel,
    coupling_row: &[f64],
) -> Result<FullHamiltonian> {
    let n = model.n_states;
    if coupling_row.len() != n {
        return Err(CoreError::invalid(format!(
            "coupling row has {} entries, model has {n} states",
            coupling_row.len()
        )));
    }
    let dim = n + 1;
    let mut matrix = Array2::<f64>::zeros((dim, dim));
    for i in 0..n {
        for j in 0..n {
            matrix[[i, j]] = model.h[[i, j]];
        }
    }
    for (i, kappa) in coupling_row.iter().enumerate() {
        if !kappa.is_finite() {
            return Err(CoreError::numeric("non-finite coupling entry"));
        }
        matrix[[i, n]] = *kappa;
        matrix[[n, i]] = *kappa;
    }
    // The |out> diagonal stays zero: the coupling term is purely off-diagonal.
    Ok(FullHamiltonian { dim, matrix })
}

/// Build the Liouvillian for the full Hamiltonian and the dephasing rates of
/// the N black-box states (|out> is not dephased).
///
/// With row-major vectorization, vec(A X B) = (A kron B^T) vec(X), so
///   M = -i (H kron I - I kron H^T)
///       + sum_n G_n^2 (E_nn kron E_nn - 1/2 E_nn kron I - 1/2 I kron E_nn)
/// where E_nn = |n><n|. The dissipator carries G_n^2 because the operators
/// are G_n |n><n| as written.
pub fn build_liouvillian(full_h: &FullHamiltonian, gamma: &[f64]) -> Result<Liouvillian> {
    let d = full_h.dim;
    if gamma.len() != d - 1 {
        return Err(CoreError::invalid(format!(
            "expected {} dephasing rates for dimension {d}, got {}",
            d - 1,
            gamma.len()
        )));
    }
    for v in full_h.matrix.iter().chain(gamma.iter()) {
        if !v.is_finite() {
            return Err(CoreError::numeric("non-finite Liouvillian input"));
        }
    }

    let h: Array2<C64> = full_h.matrix.mapv(|x| C64::new(x, 0.0));
    let h_t: Array2<C64> = {
        let mut t = Array2::<C64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                t[[i, j]] = h[[j, i]];
            }
        }
        t
    };
    let eye = Array2::<C64>::eye(d);

    let minus_i = C64::new(0.0, -1.0);
    let mut m = linalg::kron(&h, &eye);
    m -= &linalg::kron(&eye, &h_t);
    m.mapv_inplace(|z| z * minus_i);

    for (n, g) in gamma.iter().enumerate() {
        let rate = g * g;
        if rate == 0.0 {
            continue;
        }
        let mut proj = Array2::<C64>::zeros((d, d));
        proj[[n, n]] = C64::new(1.0, 0.0);
        let mut diss = linalg::kron(&proj, &proj);
        let half = C64::new(0.5, 0.0);
        let p_i = linalg::kron(&proj, &eye);
        let i_p = linalg::kron(&eye, &proj);
        diss.zip_mut_with(&p_i, |a, b| *a -= half * b);
        diss.zip_mut_with(&i_p, |a, b| *a -= half * b);
        m.zip_mut_with(&diss, |a, b| *a += C64::new(rate, 0.0) * b);
    }

    Ok(Liouvillian { rho_dim: d, matrix: m })
}

/// Exact propagation: returns unvec(exp(M t) vec(rho0)).
pub fn propagate_expm(liou: &Liouvillian, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !t.is_finite() || t < 0.0 {
        return Err(CoreError::invalid(format!("propagation time {t} must be >= 0")));
    }
    if rho0.dim() != liou.rho_dim {
        return Err(CoreError::invalid(format!(
            "state dimension {} does not match Liouvillian dimension {}",
            rho0.dim(),
            liou.rho_dim
        )));
    }
    if rho0.rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CoreError::numeric("non-finite entries in initial state"));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let scaled = liou.matrix.mapv(|z| z * t);
    let propagator = linalg::expm(&scaled)?;
    let out = linalg::matvec(&propagator, &rho0.to_vec());
    DensityMatrix::from_vec(&out)
}

/// Fixed-step classical RK4 integration of the same master equation.
///
/// Cross-check integrator only; the pipeline always propagates with the
/// matrix exponential.
pub fn propagate_rk4(
    model: &EffectiveModel,
    coupling_row: &[f64],
    rho0: &DensityMatrix,
    t: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(CoreError::invalid(format!("step size {dt} must be > 0")));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(CoreError::invalid(format!("propagation time {t} must be >= 0")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    if dt > t {
        return Err(CoreError::invalid(format!("step size {dt} exceeds time span {t}")));
    }
    let full_h = assemble_hamiltonian(model, coupling_row)?;
    let liou = build_liouvillian(&full_h, &model.gamma)?;
    let m = &liou.matrix;

    let mut y = rho0.to_vec();
    let n_full = (t / dt).floor() as usize;
    let remainder = t - n_full as f64 * dt;

    let step = |y: &Array1<C64>, h: f64| -> Array1<C64> {
        let k1 = linalg::matvec(m, y);
        let k2 = linalg::matvec(m, &(y + &k1.mapv(|z| z * (h / 2.0))));
        let k3 = linalg::matvec(m, &(y + &k2.mapv(|z| z * (h / 2.0))));
        let k4 = linalg::matvec(m, &(y + &k3.mapv(|z| z * h)));
        y + &((k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0)))
    };

    for _ in 0..n_full {
        y = step(&y, dt);
    }
    if remainder > 1e-15 * t {
        y = step(&y, remainder);
    }
    DensityMatrix::from_vec(&y)
}

/// Population of the output state: Re(rho[N][N]), clamped into [0,1] when it
/// lies within 1e-9 of the boundary.
pub fn output_population(rho: &DensityMatrix) -> Result<f64> {
    let d = rho.dim();
    let p = rho.rho[[d - 1, d - 1]].re;
    if !p.is_finite() {
        return Err(CoreError::numeric("non-finite output population"));
    }
    if p < -POPULATION_CLAMP_TOL || p > 1.0 + POPULATION_CLAMP_TOL {
        return Err(CoreError::invariant(format!(
            "output population {p} outside [0,1] beyond tolerance"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Populations of every state (black box plus |out>) on an ascending time
/// grid. Row k holds the diagonal of rho(t_k); each row sums to 1 within
/// 1e-9.
pub fn populations_trajectory(
    model: &EffectiveModel,
    coupling_row: &[f64],
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<Array2<f64>> {
    if t_grid.is_empty() {
        return Err(CoreError::invalid("time grid must be non-empty"));
    }
    let mut prev = -0.0f64;
    for &t in t_grid {
        if !t.is_finite() || t < 0.0 {
            return Err(CoreError::invalid(format!("time grid entry {t} must be >= 0")));
        }
        if t < prev {
            return Err(CoreError::invalid("time grid must be ascending"));
        }
        prev = t;
    }
    let full_h = assemble_hamiltonian(model, coupling_row)?;
    let liou = build_liouvillian(&full_h, &model.gamma)?;
    let d = liou.rho_dim;

    let mut out = Array2::<f64>::zeros((t_grid.len(), d));
    let mut state = rho0.clone();
    let mut t_prev = 0.0;
    for (k, &t) in t_grid.iter().enumerate() {
        state = propagate_expm(&liou, &state, t - t_prev)?;
        t_prev = t;
        let mut row_sum = 0.0;
        for i in 0..d {
            let p = state.rho[[i, i]].re;
            out[[k, i]] = p;
            row_sum += p;
        }
        if (row_sum - 1.0).abs() > TRACE_TOL {
            return Err(CoreError::invariant(format!(
                "population row at t={t} sums to {row_sum}, expected 1"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn single_state_model(h00: f64, gamma: f64) -> EffectiveModel {
        EffectiveModel::new(array![[h00]], vec![gamma]).unwrap()
    }

    #[test]
    fn assemble_single_state() {
        let model = single_state_model(0.0, 0.0);
        let full = assemble_hamiltonian(&model, &[0.5]).unwrap();
        assert_eq!(full.matrix, array![[0.0, 0.5], [0.5, 0.0]]);
    }

    #[test]
    fn assemble_zero_coupling_is_block_diagonal() {
        let model =
            EffectiveModel::new(array![[0.2, 0.1], [0.1, 0.3]], vec![0.0, 0.0]).unwrap();
        let full = assemble_hamiltonian(&model, &[0.0, 0.0]).unwrap();
        let expected = array![
            [0.2, 0.1, 0.0],
            [0.1, 0.3, 0.0],
            [0.0, 0.0, 0.0]
        ];
        assert_eq!(full.matrix, expected);
    }

    #[test]
    fn assemble_rejects_wrong_row_length() {
        let model = single_state_model(0.0, 0.0);
        assert!(matches!(
            assemble_hamiltonian(&model, &[0.5, 0.1]),
            Err(CoreError::InvalidArgument(_))
        ));
    }

    #[test]
    fn liouvillian_of_trivial_system_is_zero() {
        let model = single_state_model(0.0, 0.0);
        let full = assemble_hamiltonian(&model, &[0.0]).unwrap();
        let liou = build_liouvillian(&full, &model.gamma).unwrap();
        assert_eq!(liou.matrix, Array2::<C64>::zeros((4, 4)));
    }

    #[test]
    fn liouvillian_rejects_wrong_gamma_length() {
        let model = single_state_model(0.0, 0.0);
        let full = assemble_hamiltonian(&model, &[0.0]).unwrap();
        assert!(matches!(
            build_liouvillian(&full, &[0.0, 0.0]),
            Err(CoreError::InvalidArgument(_))
        ));
    }

    #[test]
    fn derivative_of_hermitian_state_is_traceless() {
        let model = EffectiveModel::new(array![[0.4, 0.2], [0.2, 0.9]], vec![0.7, 0.3]).unwrap();
        let full = assemble_hamiltonian(&model, &[0.6, 1.1]).unwrap();
        let liou = build_liouvillian(&full, &model.gamma).unwrap();
        let mut rho = Array2::<C64>::zeros((3, 3));
        rho[[0, 0]] = C64::new(0.25, 0.0);
        rho[[1, 1]] = C64::new(0.40, 0.0);
        rho[[2, 2]] = C64::new(0.35, 0.0);
        rho[[0, 1]] = C64::new(0.1, 0.05);
        rho[[1, 0]] = C64::new(0.1, -0.05);
        let state = DensityMatrix { rho };
        let deriv = linalg::matvec(&liou.matrix, &state.to_vec());
        let d = 3;
        let trace: C64 = (0..d).map(|i| deriv[i * d + i]).sum();
        let norm: f64 = deriv.iter().map(|z| z.norm()).sum();
        assert!(trace.norm() <= 1e-10 * norm.max(1.0));
    }

    #[test]
    fn propagate_zero_time_is_identity() {
        let model = single_state_model(0.3, 0.4);
        let full = assemble_hamiltonian(&model, &[0.8]).unwrap();
        let liou = build_liouvillian(&full, &model.gamma).unwrap();
        let rho0 = DensityMatrix::pure_basis(2, 0).unwrap();
        let rho = propagate_expm(&liou, &rho0, 0.0).unwrap();
        assert_eq!(rho, rho0);
    }

    #[test]
    fn propagate_rejects_negative_time() {
        let model = single_state_model(0.0, 0.0);
        let full = assemble_hamiltonian(&model, &[0.0]).unwrap();
        let liou = build_liouvillian(&full, &model.gamma).unwrap();
        let rho0 = DensityMatrix::pure_basis(2, 0).unwrap();
        assert!(propagate_expm(&liou, &rho0, -0.1).is_err());
    }

    #[test]
    fn rk4_rejects_bad_step() {
        let model = single_state_model(0.0, 0.0);
        let rho0 = DensityMatrix::pure_basis(2, 0).unwrap();
        assert!(matches!(
            propagate_rk4(&model, &[0.5], &rho0, 1.0, 0.0),
            Err(CoreError::InvalidArgument(_))
        ));
        assert!(matches!(
            propagate_rk4(&model, &[0.5], &rho0, 1.0, -0.1),
            Err(CoreError::InvalidArgument(_))
        ));
    }

    #[test]
    fn output_population_of_basis_states() {
        let out_state = DensityMatrix::pure_basis(3, 2).unwrap();
        assert_eq!(output_population(&out_state).unwrap(), 1.0);
        let black_box = DensityMatrix::pure_basis(3, 1).unwrap();
        assert_eq!(output_population(&black_box).unwrap(), 0.0);
    }

    #[test]
    fn output_population_rejects_out_of_range() {
        let mut rho = Array2::<C64>::zeros((2, 2));
        rho[[1, 1]] = C64::new(1.5, 0.0);
        let state = DensityMatrix { rho };
        assert!(matches!(
            output_population(&state),
            Err(CoreError::InvariantViolation(_))
        ));
    }

    #[test]
    fn trajectory_at_t0_is_initial_diagonal() {
        let model = single_state_model(0.0, 0.0);
        let rho0 = DensityMatrix::pure_basis(2, 0).unwrap();
        let traj = populations_trajectory(&model, &[1.0], &rho0, &[0.0]).unwrap();
        assert_abs_diff_eq!(traj[[0, 0]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(traj[[0, 1]], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn trajectory_rejects_descending_grid() {
        let model = single_state_model(0.0, 0.0);
        let rho0 = DensityMatrix::pure_basis(2, 0).unwrap();
        assert!(populations_trajectory(&model, &[1.0], &rho0, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn decoupled_output_stays_empty() {
        let model = EffectiveModel::new(array![[0.4, 0.2], [0.2, 0.9]], vec![0.5, 0.2]).unwrap();
        let rho0 = DensityMatrix::pure_basis(3, 1).unwrap();
        let full = assemble_hamiltonian(&model, &[0.0, 0.0]).unwrap();
        let liou = build_liouvillian(&full, &model.gamma).unwrap();
        for &t in &[0.05, 0.15, 0.8] {
            let rho = propagate_expm(&liou, &rho0, t).unwrap();
            assert!(output_population(&rho).unwrap() <= 1e-12);
        }
    }
}
