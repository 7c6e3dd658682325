//! Clamped-free rectangular cantilever: closed-form tip compliance, an
//! independent frame-element oracle, and the end-to-end identification
//! benchmark built on them.
//!
//! Frame: `x` along the beam axis, `h` measured along `y`, `b` along `z`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compliance::{ComplianceMatrix, LoadCase};
use crate::error::{Error, Result};
use crate::fieldgen::{simulate_experiment, Axis, GridSpec, NoiseSpec};
use crate::geometry::{Matrix6, RotationModel, Vector3};
use crate::pipeline::{fit_experiment, identify_fits, Identification, PipelineConfig};

/// Saint-Venant torsion coefficient of a square section.
pub const SQUARE_TORSION_COEFF: f64 = 0.1406;

/// Rectangular cantilever in mm and N/mm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub length: f64,
    /// Section size along `z`.
    pub b: f64,
    /// Section size along `y`.
    pub h: f64,
    pub young: f64,
    pub poisson: f64,
    /// `J = coeff * long * short³`.
    #[serde(default = "default_torsion_coeff")]
    pub torsion_coeff: f64,
}

fn default_torsion_coeff() -> f64 {
    SQUARE_TORSION_COEFF
}

impl BeamSpec {
    pub fn new(length: f64, b: f64, h: f64, young: f64, poisson: f64) -> Result<Self> {
        let spec = Self {
            length,
            b,
            h,
            young,
            poisson,
            torsion_coeff: SQUARE_TORSION_COEFF,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 1000 x 10 x 10 mm steel bar.
    pub fn reference() -> Self {
        Self {
            length: 1000.0,
            b: 10.0,
            h: 10.0,
            young: 2e5,
            poisson: 0.266,
            torsion_coeff: SQUARE_TORSION_COEFF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("b", self.b),
            ("h", self.h),
            ("young", self.young),
            ("torsion_coeff", self.torsion_coeff),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "beam {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return Err(Error::InvalidInput(format!(
                "Poisson's ratio must be in (0, 0.5), got {}",
                self.poisson
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.b * self.h
    }

    /// Second moment about `y` (bending in the x-z plane).
    pub fn i_y(&self) -> f64 {
        self.h * self.b.powi(3) / 12.0
    }

    /// Second moment about `z` (bending in the x-y plane).
    pub fn i_z(&self) -> f64 {
        self.b * self.h.powi(3) / 12.0
    }

    pub fn shear_modulus(&self) -> f64 {
        self.young / (2.0 * (1.0 + self.poisson))
    }

    pub fn torsion_constant(&self) -> f64 {
        let (long, short) = if self.b >= self.h {
            (self.b, self.h)
        } else {
            (self.h, self.b)
        };
        self.torsion_coeff * long * short.powi(3)
    }
}

/// Closed-form Euler-Bernoulli tip compliance.
pub fn beam_compliance_analytic(spec: &BeamSpec) -> Result<ComplianceMatrix> {
    spec.validate()?;
    let l = spec.length;
    let e = spec.young;
    let (ei_y, ei_z) = (e * spec.i_y(), e * spec.i_z());
    let mut k = Matrix6::zeros();
    k[(0, 0)] = l / (e * spec.area());
    k[(1, 1)] = l.powi(3) / (3.0 * ei_z);
    k[(2, 2)] = l.powi(3) / (3.0 * ei_y);
    k[(3, 3)] = l / (spec.shear_modulus() * spec.torsion_constant());
    k[(4, 4)] = l / ei_y;
    k[(5, 5)] = l / ei_z;
    k[(2, 4)] = -l * l / (2.0 * ei_y);
    k[(4, 2)] = k[(2, 4)];
    k[(1, 5)] = l * l / (2.0 * ei_z);
    k[(5, 1)] = k[(1, 5)];
    Ok(ComplianceMatrix::from_k(k))
}

/// Rotational diagonal as commonly printed, `L/(3 EI)`, kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintedRotationalTerms {
    pub k55: f64,
    pub k66: f64,
}

pub fn printed_rotational_terms(spec: &BeamSpec) -> PrintedRotationalTerms {
    let l = spec.length;
    PrintedRotationalTerms {
        k55: l / (3.0 * spec.young * spec.i_y()),
        k66: l / (3.0 * spec.young * spec.i_z()),
    }
}

/// 12x12 stiffness of one element of length `l` aligned with `x`.
/// Per-node DOF order: u, v, w, theta_x, theta_y, theta_z.
fn frame_element(spec: &BeamSpec, l: f64) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(12, 12);
    let ea = spec.young * spec.area() / l;
    let gj = spec.shear_modulus() * spec.torsion_constant() / l;
    for (dof, c) in [(0, ea), (3, gj)] {
        k[(dof, dof)] += c;
        k[(dof + 6, dof + 6)] += c;
        k[(dof, dof + 6)] -= c;
        k[(dof + 6, dof)] -= c;
    }
    // Bending block for (disp1, rot1, disp2, rot2); `sign` flips the
    // displacement-rotation coupling for the x-z plane.
    let mut bending = |disp: usize, rot: usize, ei: f64, sign: f64| {
        let idx = [disp, rot, disp + 6, rot + 6];
        let s = 6.0 * l * sign;
        let l2 = l * l;
        let block = [
            [12.0, s, -12.0, s],
            [s, 4.0 * l2, -s, 2.0 * l2],
            [-12.0, -s, 12.0, -s],
            [s, 2.0 * l2, -s, 4.0 * l2],
        ];
        let c = ei / l.powi(3);
        for (r, row) in block.iter().enumerate() {
            for (q, v) in row.iter().enumerate() {
                k[(idx[r], idx[q])] += c * v;
            }
        }
    };
    bending(1, 5, spec.young * spec.i_z(), 1.0);
    bending(2, 4, spec.young * spec.i_y(), -1.0);
    k
}

/// Tip compliance from `n_elem` frame elements with the root clamped.
pub fn beam_compliance_discretized(spec: &BeamSpec, n_elem: usize) -> Result<ComplianceMatrix> {
    spec.validate()?;
    if n_elem == 0 {
        return Err(Error::InvalidInput("need at least one beam element".into()));
    }
    let l = spec.length / n_elem as f64;
    let element = frame_element(spec, l);
    // Free DOFs: nodes 1..=n_elem.
    let n = 6 * n_elem;
    let mut global = DMatrix::<f64>::zeros(n, n);
    for e in 0..n_elem {
        for r in 0..12 {
            for c in 0..12 {
                let (gr, gc) = ((6 * e + r) as isize - 6, (6 * e + c) as isize - 6);
                if gr >= 0 && gc >= 0 {
                    global[(gr as usize, gc as usize)] += element[(r, c)];
                }
            }
        }
    }
    // Jacobi scaling keeps the axial/bending magnitude spread tame.
    let scale: Vec<f64> = (0..n).map(|i| global[(i, i)].sqrt().recip()).collect();
    let scaled = DMatrix::from_fn(n, n, |r, c| global[(r, c)] * scale[r] * scale[c]);
    let chol = scaled
        .cholesky()
        .ok_or_else(|| Error::NonPhysical("beam assembly is singular".into()))?;
    let mut rhs = DMatrix::<f64>::zeros(n, 6);
    for j in 0..6 {
        rhs[(n - 6 + j, j)] = scale[n - 6 + j];
    }
    let sol = chol.solve(&rhs);
    let mut k = Matrix6::from_fn(|i, j| sol[(n - 6 + i, j)] * scale[n - 6 + i]);
    k = (k + k.transpose()) / 2.0;
    // Entries that vanish analytically come out at rounding level; clear them.
    let diag = k.diagonal();
    for i in 0..6 {
        for j in 0..6 {
            if k[(i, j)].abs() < 1e-12 * (diag[i] * diag[j]).sqrt() {
                k[(i, j)] = 0.0;
            }
        }
    }
    Ok(ComplianceMatrix::from_k(k))
}

/// Forces of 1000, 1, 1 N and moments of 1 N·m about each axis.
pub fn reference_loads() -> Vec<LoadCase> {
    let force = |i: usize, v: f64| {
        let mut f = Vector3::zeros();
        f[i] = v;
        f
    };
    vec![
        LoadCase::new(force(0, 1000.0), Vector3::zeros(), "Fx"),
        LoadCase::new(force(1, 1.0), Vector3::zeros(), "Fy"),
        LoadCase::new(force(2, 1.0), Vector3::zeros(), "Fz"),
        LoadCase::with_moment_nm(Vector3::zeros(), force(0, 1.0), "Mx"),
        LoadCase::with_moment_nm(Vector3::zeros(), force(1, 1.0), "My"),
        LoadCase::with_moment_nm(Vector3::zeros(), force(2, 1.0), "Mz"),
    ]
}

/// 10 x 10 mm tip cross-section sampled every 1 mm.
pub fn reference_grid() -> GridSpec {
    GridSpec::planar(10.0, 1.0, Axis::X)
}

/// Zero-detection outcome against the analytic sparsity pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Confusion {
    pub zero_pruned: usize,
    pub zero_kept: usize,
    pub nonzero_kept: usize,
    pub nonzero_pruned: usize,
}

#[derive(Debug, Clone)]
pub struct BeamBenchmark {
    pub spec: BeamSpec,
    pub analytic: Matrix6,
    pub printed: PrintedRotationalTerms,
    pub identification: Identification,
    /// Largest `|k_ij - k_true| / |k_true|` over analytically non-zero
    /// elements of the symmetrised result.
    pub max_rel_error: f64,
    /// Largest `|k_ij|` left on an analytically zero element, relative to
    /// `sqrt(k_ii k_jj)` of the truth.
    pub zero_leak: f64,
    pub confusion: Confusion,
    /// Smallest `|k_ij| / ci_ij` over analytically non-zero raw elements.
    pub min_margin: f64,
}

impl BeamBenchmark {
    pub fn all_zeros_detected(&self) -> bool {
        self.confusion.zero_kept == 0 && self.confusion.nonzero_pruned == 0
    }
}

/// Simulates one experiment per load on `grid`, then runs the identification
/// pipeline and scores it against the analytic compliance. Experiment `j`
/// uses `noise.for_trial(j)`.
pub fn beam_benchmark(
    spec: &BeamSpec,
    grid: &GridSpec,
    noise: &NoiseSpec,
    loads: &[LoadCase],
    config: &PipelineConfig,
    model: RotationModel,
) -> Result<BeamBenchmark> {
    let analytic = beam_compliance_analytic(spec)?.k;
    if loads.len() < 6 {
        return Err(Error::InsufficientExperiments(loads.len()));
    }
    if let Some(load) = loads.iter().find(|l| l.is_zero()) {
        return Err(Error::Unidentifiable(format!(
            "load '{}' is zero",
            load.label
        )));
    }
    let fits = loads
        .par_iter()
        .enumerate()
        .map(|(j, load)| {
            let field =
                simulate_experiment(&analytic, load, grid, &noise.for_trial(j as u64), model)?;
            fit_experiment(load.clone(), &field, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let identification = identify_fits(fits, config)?;
    Ok(score(spec, analytic, identification))
}

fn score(spec: &BeamSpec, analytic: Matrix6, identification: Identification) -> BeamBenchmark {
    let sym = &identification.symmetric;
    let raw = &identification.raw;
    let mut confusion = Confusion::default();
    let mut max_rel_error: f64 = 0.0;
    let mut zero_leak: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    for i in 0..6 {
        for j in 0..6 {
            let truth = analytic[(i, j)];
            let kept = identification.pruned.significant[i][j];
            if truth == 0.0 {
                if kept {
                    confusion.zero_kept += 1;
                } else {
                    confusion.zero_pruned += 1;
                }
                let norm = (analytic[(i, i)] * analytic[(j, j)]).sqrt();
                zero_leak = zero_leak.max(sym.k[(i, j)].abs() / norm);
            } else {
                if kept {
                    confusion.nonzero_kept += 1;
                } else {
                    confusion.nonzero_pruned += 1;
                }
                max_rel_error = max_rel_error.max(((sym.k[(i, j)] - truth) / truth).abs());
                min_margin = min_margin.min(raw.margin(i, j));
            }
        }
    }
    BeamBenchmark {
        spec: *spec,
        analytic,
        printed: printed_rotational_terms(spec),
        identification,
        max_rel_error,
        zero_leak,
        confusion,
        min_margin,
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(k: &Matrix6) -> f64 {
    SymmetricEigen::new(*k).eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rel_close(a: &Matrix6, b: &Matrix6, tol: f64) -> bool {
        (0..6).all(|i| {
            (0..6).all(|j| {
                let scale = (a[(i, i)] * a[(j, j)]).sqrt();
                (a[(i, j)] - b[(i, j)]).abs() <= tol * scale
            })
        })
    }

    #[test]
    fn reference_values() {
        let k = beam_compliance_analytic(&BeamSpec::reference()).unwrap().k;
        assert_relative_eq!(k[(0, 0)], 5.0e-5, max_relative = 1e-14);
        assert_relative_eq!(k[(1, 1)], 2.0, max_relative = 1e-14);
        assert_relative_eq!(k[(2, 2)], 2.0, max_relative = 1e-14);
        assert!(k[(2, 4)] < 0.0 && k[(1, 5)] > 0.0);
        assert_eq!(k.iter().filter(|v| **v == 0.0).count(), 26);
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn printed_terms_are_a_third() {
        let spec = BeamSpec::reference();
        let k = beam_compliance_analytic(&spec).unwrap().k;
        let p = printed_rotational_terms(&spec);
        assert_relative_eq!(p.k55 * 3.0, k[(4, 4)], max_relative = 1e-14);
        assert_relative_eq!(p.k66 * 3.0, k[(5, 5)], max_relative = 1e-14);
        // The printed values make the bending block indefinite.
        let mut printed = k;
        printed[(4, 4)] = p.k55;
        printed[(5, 5)] = p.k66;
        assert!(min_eigenvalue(&printed) < 0.0);
    }

    #[test]
    fn discretized_matches_analytic() {
        let spec = BeamSpec::reference();
        let a = beam_compliance_analytic(&spec).unwrap().k;
        for n in [1, 50] {
            let d = beam_compliance_discretized(&spec, n).unwrap().k;
            assert!(rel_close(&a, &d, 1e-9), "n_elem = {n}\n{d}");
            assert_eq!(d, d.transpose());
        }
    }

    #[test]
    fn torsion_decouples() {
        let spec = BeamSpec::new(500.0, 20.0, 8.0, 7e4, 0.33).unwrap();
        let d = beam_compliance_discretized(&spec, 3).unwrap().k;
        let expected = spec.length / (spec.shear_modulus() * spec.torsion_constant());
        assert_relative_eq!(d[(3, 3)], expected, max_relative = 1e-10);
    }

    #[test]
    fn invalid_specs() {
        assert!(BeamSpec::new(0.0, 1.0, 1.0, 1.0, 0.3).is_err());
        assert!(BeamSpec::new(1.0, 1.0, 1.0, 1.0, 0.5).is_err());
        assert!(beam_compliance_discretized(&BeamSpec::reference(), 0).is_err());
    }

    #[test]
    fn scaling_law() {
        let spec = BeamSpec::reference();
        let doubled = BeamSpec {
            length: 2.0 * spec.length,
            ..spec
        };
        let a = beam_compliance_analytic(&spec).unwrap().k;
        let b = beam_compliance_analytic(&doubled).unwrap().k;
        assert_relative_eq!(b[(1, 1)] / a[(1, 1)], 8.0, max_relative = 1e-14);
        assert_relative_eq!(b[(0, 0)] / a[(0, 0)], 2.0, max_relative = 1e-14);
        assert_relative_eq!(b[(5, 5)] / a[(5, 5)], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn noiseless_benchmark_is_exact() {
        let report = beam_benchmark(
            &BeamSpec::reference(),
            &reference_grid(),
            &NoiseSpec::none(),
            &reference_loads(),
            &PipelineConfig::default(),
            RotationModel::Linearized,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{}", report.max_rel_error);
        assert!(report.zero_leak < 1e-9);
    }

    #[test]
    fn zero_load_rejected() {
        let mut loads = reference_loads();
        loads[2] = LoadCase::new(Vector3::zeros(), Vector3::zeros(), "none");
        let err = beam_benchmark(
            &BeamSpec::reference(),
            &reference_grid(),
            &NoiseSpec::none(),
            &loads,
            &PipelineConfig::default(),
            RotationModel::Linearized,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unidentifiable(_)));
    }

    fn beam_strategy() -> impl Strategy<Value = BeamSpec> {
        (100.0..3000.0, 2.0..50.0, 2.0..50.0, 1e4..3e5, 0.05..0.49)
            .prop_map(|(l, b, h, e, nu)| BeamSpec::new(l, b, h, e, nu).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]
        #[test]
        fn oracles_agree(spec in beam_strategy()) {
            let a = beam_compliance_analytic(&spec).unwrap().k;
            let d = beam_compliance_discretized(&spec, 7).unwrap().k;
            prop_assert!(rel_close(&a, &d, 1e-9));
            prop_assert!(min_eigenvalue(&a) > 0.0);
        }
    }
}
