//! Compliance matrix assembly from load experiments, uncertainty scaling,
//! significance pruning, symmetrisation and inversion to stiffness.
//!
//! The compliance `k` maps a wrench `(F [N], M [N·mm])` to a deflection
//! `(t [mm], phi [rad])`. Each experiment contributes one wrench column `w_j`
//! and one deflection column `d_j`; with `W = [w_1 .. w_m]` and
//! `D = [d_1 .. d_m]` the least-squares compliance is `k = D W⁺`, which for
//! the canonical one-component loads reduces to dividing each deflection
//! column by its load amplitude.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{Matrix6, RigidDeflection, Vector3, Vector6};
use crate::statistics::{
    significance_test, DeflectionCovariance, Significance, SignificanceConfig,
};

/// Relative singular-value floor for the wrench matrix.
const RANK_TOL: f64 = 1e-12;

/// Relative asymmetry tolerated by [`to_stiffness`].
const SYMMETRY_TOL: f64 = 1e-12;

pub const COMPONENT_LABELS: [&str; 6] = ["Fx", "Fy", "Fz", "Mx", "My", "Mz"];

/// Applied wrench for one experiment. Moments are in N·mm.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase {
    pub force: Vector3,
    pub moment: Vector3,
    pub label: String,
}

impl LoadCase {
    pub fn new(force: Vector3, moment: Vector3, label: impl Into<String>) -> Self {
        Self {
            force,
            moment,
            label: label.into(),
        }
    }

    /// Builds a load from a moment given in N·m.
    pub fn with_moment_nm(force: Vector3, moment_nm: Vector3, label: impl Into<String>) -> Self {
        Self::new(force, moment_nm * 1000.0, label)
    }

    /// Load exciting only wrench component `index` (0..6) with `amplitude`.
    pub fn canonical(index: usize, amplitude: f64) -> Self {
        let mut w = Vector6::zeros();
        w[index] = amplitude;
        Self::from_wrench(&w, COMPONENT_LABELS[index])
    }

    pub fn from_wrench(w: &Vector6, label: impl Into<String>) -> Self {
        Self::new(
            Vector3::new(w[0], w[1], w[2]),
            Vector3::new(w[3], w[4], w[5]),
            label,
        )
    }

    pub fn wrench(&self) -> Vector6 {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.moment.x,
            self.moment.y,
            self.moment.z,
        )
    }

    pub fn is_zero(&self) -> bool {
        self.wrench().iter().all(|v| *v == 0.0)
    }
}

/// One identified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub load: LoadCase,
    pub deflection: RigidDeflection,
    pub covariance: DeflectionCovariance,
}

/// 6x6 compliance with per-element uncertainty and significance flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceMatrix {
    pub k: Matrix6,
    /// Per-element standard deviation.
    pub std: Matrix6,
    /// Per-element confidence half-width.
    pub ci: Matrix6,
    pub significant: [[bool; 6]; 6],
}

impl ComplianceMatrix {
    /// Wraps a known matrix: no uncertainty, non-zero entries significant.
    pub fn from_k(k: Matrix6) -> Self {
        let mut significant = [[false; 6]; 6];
        for (i, row) in significant.iter_mut().enumerate() {
            for (j, s) in row.iter_mut().enumerate() {
                *s = k[(i, j)] != 0.0;
            }
        }
        Self {
            k,
            std: Matrix6::zeros(),
            ci: Matrix6::zeros(),
            significant,
        }
    }

    /// Attaches standard deviations and the matching `k * std` half-widths.
    pub fn with_uncertainty(mut self, std: Matrix6, config: &SignificanceConfig) -> Self {
        self.ci = std * config.k;
        self.std = std;
        self
    }

    pub fn zero_count(&self) -> usize {
        self.significant.iter().flatten().filter(|s| !**s).count()
    }

    /// `|k_ij| / ci_ij`, infinite when the half-width is zero.
    pub fn margin(&self, i: usize, j: usize) -> f64 {
        let ci = self.ci[(i, j)];
        if ci == 0.0 {
            f64::INFINITY
        } else {
            self.k[(i, j)].abs() / ci
        }
    }
}

fn wrench_and_deflection_matrices(
    experiments: &[Experiment],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = experiments.len();
    if m < 6 {
        return Err(Error::InsufficientExperiments(m));
    }
    let mut w = DMatrix::zeros(6, m);
    let mut d = DMatrix::zeros(6, m);
    for (j, e) in experiments.iter().enumerate() {
        let wj = e.load.wrench();
        let dj = e.deflection.to_vector6();
        if !wj.iter().chain(dj.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "experiment {j} has non-finite values"
            )));
        }
        w.set_column(j, &wj);
        d.set_column(j, &dj);
    }
    Ok((w, d))
}

fn wrench_pseudo_inverse(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = w.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if max.is_nan() || max <= 0.0 || min <= RANK_TOL * max {
        return Err(Error::Unidentifiable(format!(
            "wrench matrix has rank below 6 (singular values span [{min:e}, {max:e}])"
        )));
    }
    svd.pseudo_inverse(RANK_TOL * max)
        .map_err(|e| Error::Unidentifiable(e.to_string()))
}

/// Least-squares compliance `k = D W⁺` from `m >= 6` experiments.
pub fn identify(experiments: &[Experiment]) -> Result<ComplianceMatrix> {
    let (w, d) = wrench_and_deflection_matrices(experiments)?;
    let w_pinv = wrench_pseudo_inverse(&w)?;
    let k = &d * &w_pinv;
    let mut out = ComplianceMatrix::from_k(Matrix6::from_iterator(k.iter().copied()));
    out.significant = [[true; 6]; 6];
    Ok(out)
}

/// Per-element standard deviation of `k = D W⁺` with every experiment's
/// covariance rescaled to noise level `sigma`. Experiments are independent,
/// so `var(k_ij) = sum_l var(d_il) (W⁺_lj)²`.
pub fn propagated_std(experiments: &[Experiment], sigma: f64) -> Result<Matrix6> {
    let (w, _) = wrench_and_deflection_matrices(experiments)?;
    let w_pinv = wrench_pseudo_inverse(&w)?;
    let mut var = Matrix6::zeros();
    for (l, e) in experiments.iter().enumerate() {
        let comp_std = e.covariance.rescaled(sigma).std();
        for i in 0..6 {
            for j in 0..6 {
                var[(i, j)] += (comp_std[i] * w_pinv[(l, j)]).powi(2);
            }
        }
    }
    Ok(var.map(f64::sqrt))
}

/// Confidence half-widths `k_mult * std` for every compliance element.
pub fn scale_ci(
    experiments: &[Experiment],
    sigma: f64,
    config: &SignificanceConfig,
) -> Result<Matrix6> {
    Ok(propagated_std(experiments, sigma)? * config.k)
}

/// Zeroes every element whose `k * std` interval contains zero.
pub fn prune(matrix: &ComplianceMatrix, config: &SignificanceConfig) -> ComplianceMatrix {
    let mut out = matrix.clone();
    out.ci = matrix.std * config.k;
    for i in 0..6 {
        for j in 0..6 {
            let verdict = significance_test(matrix.k[(i, j)], matrix.std[(i, j)], config);
            let keep = verdict == Significance::Significant;
            out.significant[i][j] = keep;
            if !keep {
                out.k[(i, j)] = 0.0;
            }
        }
    }
    out
}

/// `k <- (k + kᵀ)/2`. Uncertainties combine as the RMS of the mirrored pair
/// and an element stays significant if either mirror was.
pub fn symmetrize(matrix: &ComplianceMatrix) -> ComplianceMatrix {
    let mut out = matrix.clone();
    for i in 0..6 {
        for j in 0..6 {
            out.k[(i, j)] = (matrix.k[(i, j)] + matrix.k[(j, i)]) / 2.0;
            let rms = |m: &Matrix6| ((m[(i, j)].powi(2) + m[(j, i)].powi(2)) / 2.0).sqrt();
            out.std[(i, j)] = rms(&matrix.std);
            out.ci[(i, j)] = rms(&matrix.ci);
            out.significant[i][j] = matrix.significant[i][j] || matrix.significant[j][i];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stiffness {
    pub matrix: Matrix6,
    pub min_eigenvalue: f64,
}

/// Inverts a symmetric positive-definite compliance into stiffness.
pub fn to_stiffness(matrix: &ComplianceMatrix) -> Result<Stiffness> {
    let k = matrix.k;
    if !k.iter().all(|v| v.is_finite()) {
        return Err(Error::NonPhysical(
            "compliance has non-finite entries".into(),
        ));
    }
    let scale = k.amax();
    let asym = (k - k.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NonPhysical(format!(
            "compliance is not symmetric (max asymmetry {asym:e}); symmetrize it first"
        )));
    }
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::NonPhysical("compliance is not positive definite".into()))?;
    let inv = chol.inverse();
    let stiffness = (inv + inv.transpose()) / 2.0;
    let min_eigenvalue = SymmetricEigen::new(stiffness).eigenvalues.min();
    if min_eigenvalue.is_nan() || min_eigenvalue <= 0.0 {
        return Err(Error::NonPhysical(format!(
            "stiffness smallest eigenvalue {min_eigenvalue:e} is not positive"
        )));
    }
    Ok(Stiffness {
        matrix: stiffness,
        min_eigenvalue,
    })
}

fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exp = x.abs().log10().floor() as i32 - (digits - 1);
    let scale = 10f64.powi(exp);
    (x / scale).round() * scale
}

/// Picks one canonical load per wrench component so the dominant deflection
/// lands in the target window.
///
/// For column `j` the direct deflection `k_jj * F` must lie in its window
/// (translation window in mm for forces, rotation window in degrees for
/// moments) and every coupled deflection `k_ij * F` must stay below the
/// upper end of its own window. The amplitude is the geometric midpoint of
/// the feasible interval rounded to one significant figure.
pub fn recommend_loads(
    approx_k: &ComplianceMatrix,
    t_range: (f64, f64),
    phi_range_deg: (f64, f64),
) -> Result<Vec<LoadCase>> {
    let k = &approx_k.k;
    if !k.iter().all(|v| v.is_finite()) {
        return Err(Error::Recommendation(
            "compliance has non-finite entries".into(),
        ));
    }
    for (name, (lo, hi)) in [("translation", t_range), ("rotation", phi_range_deg)] {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Recommendation(format!(
                "{name} window [{lo}, {hi}] must be positive and ordered"
            )));
        }
    }
    let phi_range = (phi_range_deg.0.to_radians(), phi_range_deg.1.to_radians());
    let window = |i: usize| if i < 3 { t_range } else { phi_range };

    let mut loads = Vec::with_capacity(6);
    for j in 0..6 {
        let direct = k[(j, j)];
        if direct.is_nan() || direct <= 0.0 {
            return Err(Error::Recommendation(format!(
                "diagonal compliance k{}{} = {direct:e} must be positive",
                j + 1,
                j + 1
            )));
        }
        let (lo, hi) = window(j);
        let lower = lo / direct;
        let mut upper = hi / direct;
        let mut limiting = format!("k{0}{0}", j + 1);
        for i in (0..6).filter(|&i| i != j) {
            let coupled = k[(i, j)].abs();
            if coupled > 0.0 {
                let cap = window(i).1 / coupled;
                if cap < upper {
                    upper = cap;
                    limiting = format!("k{}{}", i + 1, j + 1);
                }
            }
        }
        if upper < lower {
            return Err(Error::Recommendation(format!(
                "{}: direct window needs amplitude >= {lower:e} but {limiting} caps it at {upper:e}",
                COMPONENT_LABELS[j]
            )));
        }
        let mid = (lower * upper).sqrt();
        let amplitude = [1, 2]
            .into_iter()
            .map(|d| round_sig(mid, d))
            .find(|a| (lower..=upper).contains(a))
            .unwrap_or(mid);
        loads.push(LoadCase::canonical(j, amplitude));
    }
    Ok(loads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Matrix3;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cov() -> DeflectionCovariance {
        DeflectionCovariance::from_unit(Matrix3::identity(), Matrix3::identity() * 0.01, 1.0)
    }

    fn random_spd(seed: u64) -> Matrix6 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix6::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + Matrix6::identity() * 0.5
    }

    fn experiments_for(k: &Matrix6, amplitudes: &[f64; 6]) -> Vec<Experiment> {
        (0..6)
            .map(|j| {
                let load = LoadCase::canonical(j, amplitudes[j]);
                let deflection = RigidDeflection::from_vector6(&(k * load.wrench()));
                Experiment {
                    load,
                    deflection,
                    covariance: unit_cov(),
                }
            })
            .collect()
    }

    fn rel_err(a: &Matrix6, b: &Matrix6) -> f64 {
        (a - b).amax() / b.amax()
    }

    #[test]
    fn canonical_identification_is_column_division() {
        let k = random_spd(1);
        let ex = experiments_for(&k, &[1.0; 6]);
        assert!(rel_err(&identify(&ex).unwrap().k, &k) <= 1e-12);
        let ex = experiments_for(&k, &[1000.0, 1.0, 1.0, 1000.0, 1000.0, 1000.0]);
        assert!(rel_err(&identify(&ex).unwrap().k, &k) <= 1e-12);
    }

    #[test]
    fn duplicated_loads_match_minimal_set() {
        let k = random_spd(2);
        let base = experiments_for(&k, &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let mut doubled = base.clone();
        for e in &base {
            let load = LoadCase::from_wrench(&-e.load.wrench(), format!("-{}", e.load.label));
            let deflection = RigidDeflection::from_vector6(&-e.deflection.to_vector6());
            doubled.push(Experiment {
                load,
                deflection,
                covariance: unit_cov(),
            });
        }
        let a = identify(&base).unwrap().k;
        let b = identify(&doubled).unwrap().k;
        assert!(rel_err(&b, &a) <= 1e-14);
    }

    #[test]
    fn identify_preconditions() {
        let k = random_spd(3);
        let ex = experiments_for(&k, &[1.0; 6]);
        assert!(matches!(
            identify(&ex[..5]),
            Err(Error::InsufficientExperiments(5))
        ));
        let mut degenerate = ex.clone();
        degenerate[5].load = degenerate[4].load.clone();
        assert!(matches!(
            identify(&degenerate),
            Err(Error::Unidentifiable(_))
        ));
        let mut zero = ex;
        zero[0].load = LoadCase::new(Vector3::zeros(), Vector3::zeros(), "none");
        assert!(matches!(identify(&zero), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn ci_scales_inversely_with_load() {
        let k = random_spd(4);
        let cfg = SignificanceConfig::default();
        let a = scale_ci(&experiments_for(&k, &[1.0; 6]), 1.0, &cfg).unwrap();
        let b = scale_ci(
            &experiments_for(&k, &[1.0, 2.0, 1.0, 1.0, 1.0, 1.0]),
            1.0,
            &cfg,
        )
        .unwrap();
        for i in 0..6 {
            assert!((b[(i, 1)] - a[(i, 1)] / 2.0).abs() <= 1e-15 * a[(i, 1)]);
            assert_eq!(b[(i, 0)], a[(i, 0)]);
        }
        // Canonical loads: half-width is k * std(component) / amplitude.
        assert!((a[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((a[(3, 0)] - 0.3).abs() < 1e-12);
        let zero = scale_ci(&experiments_for(&k, &[1.0; 6]), 0.0, &cfg).unwrap();
        assert_eq!(zero, Matrix6::zeros());
    }

    #[test]
    fn prune_zeroes_insignificant_entries() {
        let mut k = Matrix6::identity();
        k[(0, 1)] = 1e-6;
        k[(2, 4)] = -2e-6;
        let cfg = SignificanceConfig::default();
        let m = ComplianceMatrix::from_k(k).with_uncertainty(Matrix6::from_element(1e-5), &cfg);
        let pruned = prune(&m, &cfg);
        assert_eq!(pruned.k, Matrix6::identity());
        assert_eq!(pruned.zero_count(), 30);
        assert!(!pruned.significant[0][1]);

        let all = ComplianceMatrix::from_k(Matrix6::from_element(1.0))
            .with_uncertainty(Matrix6::from_element(1e-3), &cfg);
        assert_eq!(prune(&all, &cfg), all);
    }

    #[test]
    fn symmetrize_examples() {
        let sym = ComplianceMatrix::from_k(random_spd(5));
        assert_eq!(symmetrize(&sym).k, sym.k);
        let mut k = Matrix6::identity();
        k[(0, 1)] = 2.0;
        let out = symmetrize(&ComplianceMatrix::from_k(k));
        assert_eq!(out.k[(0, 1)], 1.0);
        assert_eq!(out.k[(1, 0)], 1.0);
        assert_eq!(out.k.diagonal(), k.diagonal());
        let cfg = SignificanceConfig::default();
        let noisy = ComplianceMatrix::from_k(Matrix6::from_fn(|i, j| (i * 7 + j) as f64))
            .with_uncertainty(Matrix6::from_fn(|i, j| (1 + i + 2 * j) as f64), &cfg);
        let once = symmetrize(&noisy);
        assert_eq!(symmetrize(&once), once);
    }

    #[test]
    fn stiffness_of_diagonal() {
        let c = Vector6::new(1.0, 2.0, 4.0, 0.5, 0.25, 8.0);
        let s = to_stiffness(&ComplianceMatrix::from_k(Matrix6::from_diagonal(&c))).unwrap();
        assert!((s.matrix - Matrix6::from_diagonal(&c.map(|v| 1.0 / v))).amax() < 1e-14);
        assert_relative_eq!(s.min_eigenvalue, 0.125, max_relative = 1e-14);
    }

    #[test]
    fn stiffness_rejects_asymmetric_and_indefinite() {
        let mut k = Matrix6::identity();
        k[(0, 1)] = 0.1;
        assert!(matches!(
            to_stiffness(&ComplianceMatrix::from_k(k)),
            Err(Error::NonPhysical(_))
        ));
        assert!(to_stiffness(&symmetrize(&ComplianceMatrix::from_k(k))).is_ok());
        let mut indefinite = Matrix6::identity();
        indefinite[(5, 5)] = -1.0;
        assert!(matches!(
            to_stiffness(&ComplianceMatrix::from_k(indefinite)),
            Err(Error::NonPhysical(_))
        ));
    }

    #[test]
    fn stiffness_inverse_round_trip() {
        for seed in 0..10 {
            let k = random_spd(seed);
            let s = to_stiffness(&ComplianceMatrix::from_k(k)).unwrap();
            assert!((s.matrix * k - Matrix6::identity()).amax() <= 1e-10);
        }
    }

    #[test]
    fn recommend_diagonal_translation() {
        let mut k = Matrix6::identity();
        k[(1, 1)] = 2.0;
        let loads = recommend_loads(&ComplianceMatrix::from_k(k), (0.1, 1.0), (0.01, 0.2)).unwrap();
        assert_eq!(loads.len(), 6);
        assert_eq!(loads[1].force.y, 0.2);
        assert_eq!(loads[1].label, "Fy");
    }

    #[test]
    fn recommend_rejects_bad_inputs() {
        let mut k = Matrix6::identity();
        k[(2, 2)] = f64::INFINITY;
        assert!(matches!(
            recommend_loads(&ComplianceMatrix::from_k(k), (0.1, 1.0), (0.01, 0.2)),
            Err(Error::Recommendation(_))
        ));
        // A coupling so strong that staying under its cap forbids reaching
        // the direct window.
        let mut k = Matrix6::identity() * 1e-3;
        k[(3, 0)] = 1.0;
        let err =
            recommend_loads(&ComplianceMatrix::from_k(k), (0.1, 1.0), (0.01, 0.2)).unwrap_err();
        assert!(err.to_string().contains("k41"), "{err}");
    }

    #[test]
    fn rounding_to_significant_figures() {
        assert_eq!(round_sig(0.158, 1), 0.2);
        assert_eq!(round_sig(6324.5, 1), 6000.0);
        assert_eq!(round_sig(6324.5, 2), 6300.0);
    }
}
