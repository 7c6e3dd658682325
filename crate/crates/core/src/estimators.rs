//! Rigid-deflection estimators.
//!
//! Two routes fit `p + dp = R p + t` to a displacement field in the least
//! squares sense:
//!
//! * the Procrustes route ([`estimate_svd`]) finds the best proper rotation
//!   from the SVD of the centred cross-covariance and then reads the small
//!   angles off the rotation matrix with one of three extraction rules;
//! * the linearised route ([`estimate_lin`]) substitutes `R = I + [phi]x`
//!   up front, which turns the fit into a linear problem. Working about the
//!   centroid decouples it into a mean for `t` and a 3x3 solve for `phi`.
//!   [`estimate_lin_full`] solves the same problem through the undecoupled
//!   6x6 normal equations and serves as a cross-check.
//!
//! Both report the translation at the field's reference point.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DisplacementField, MIN_NODES};
use crate::geometry::{skew_neg, Matrix3, Matrix6, RigidDeflection, Vector3, Vector6};

/// Condition number of the rotational normal matrix above which the rotation
/// is declared unidentifiable.
pub const MAX_CONDITION: f64 = 1e12;

/// Rule for reading rotation angles off a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SvdVariant {
    /// `(r32, r13, r21)`
    #[serde(rename = "svd+")]
    Plus,
    /// `(-r23, -r31, -r12)`
    #[serde(rename = "svd-")]
    Minus,
    /// Mean of the two.
    #[serde(rename = "svd±", alias = "svd+-")]
    Avg,
}

impl SvdVariant {
    pub fn extract(self, r: &Matrix3) -> Vector3 {
        let plus = Vector3::new(r[(2, 1)], r[(0, 2)], r[(1, 0)]);
        let minus = Vector3::new(-r[(1, 2)], -r[(2, 0)], -r[(0, 1)]);
        match self {
            SvdVariant::Plus => plus,
            SvdVariant::Minus => minus,
            SvdVariant::Avg => Vector3::new(
                (r[(2, 1)] - r[(1, 2)]) / 2.0,
                (r[(0, 2)] - r[(2, 0)]) / 2.0,
                (r[(1, 0)] - r[(0, 1)]) / 2.0,
            ),
        }
    }
}

/// Estimator selection, as named on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "svd+")]
    SvdPlus,
    #[serde(rename = "svd-")]
    SvdMinus,
    #[serde(rename = "svd±", alias = "svd+-")]
    SvdAvg,
    #[serde(rename = "lin")]
    Lin,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::SvdPlus,
        Estimator::SvdMinus,
        Estimator::SvdAvg,
        Estimator::Lin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::SvdPlus => "svd+",
            Estimator::SvdMinus => "svd-",
            Estimator::SvdAvg => "svd±",
            Estimator::Lin => "lin",
        }
    }

    pub fn estimate(self, field: &DisplacementField) -> Result<EstimatorOutput> {
        match self {
            Estimator::SvdPlus => estimate_svd(field, SvdVariant::Plus),
            Estimator::SvdMinus => estimate_svd(field, SvdVariant::Minus),
            Estimator::SvdAvg => estimate_svd(field, SvdVariant::Avg),
            Estimator::Lin => estimate_lin(field),
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svd+" | "svd-plus" => Ok(Estimator::SvdPlus),
            "svd-" | "svd-minus" => Ok(Estimator::SvdMinus),
            "svd±" | "svd+-" | "svd-avg" => Ok(Estimator::SvdAvg),
            "lin" => Ok(Estimator::Lin),
            other => Err(format!(
                "unknown estimator `{other}` (expected svd+, svd-, svd± / svd+-, or lin)"
            )),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    pub deflection: RigidDeflection,
    /// Fitted rotation; only the Procrustes route produces one.
    pub rotation_matrix: Option<Matrix3>,
    /// Sum of squared residuals, mm².
    pub residual_sum_sq: f64,
    pub per_node_residuals: Vec<Vector3>,
}

impl EstimatorOutput {
    fn new(
        deflection: RigidDeflection,
        rotation_matrix: Option<Matrix3>,
        residuals: Vec<Vector3>,
    ) -> Self {
        let residual_sum_sq = residuals.iter().map(|r| r.norm_squared()).sum();
        Self {
            deflection,
            rotation_matrix,
            residual_sum_sq,
            per_node_residuals: residuals,
        }
    }
}

fn check_node_count(field: &DisplacementField) -> Result<()> {
    if field.len() < MIN_NODES {
        return Err(Error::InsufficientData {
            needed: MIN_NODES,
            got: field.len(),
        });
    }
    Ok(())
}

/// Rejects symmetric matrices that are singular or too badly conditioned to
/// invert reliably.
fn check_conditioning(m: &Matrix3) -> Result<()> {
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if max.is_nan() || max <= 0.0 || min <= max / MAX_CONDITION {
        return Err(Error::RotationUnidentifiable(format!(
            "normal matrix eigenvalues span [{min:e}, {max:e}]; nodes are collinear or coincident"
        )));
    }
    Ok(())
}

/// `sum P̂ᵀP̂` over the centred node positions.
pub fn d_matrix(field: &DisplacementField) -> Matrix3 {
    let c = field.centroid();
    field
        .positions()
        .map(|p| {
            let s = skew_neg(&(p - c));
            s.transpose() * s
        })
        .sum()
}

/// Diagonal of the rotational normal matrix written out coordinate-wise:
/// `[sum(ŷ²+ẑ²), sum(x̂²+ẑ²), sum(x̂²+ŷ²)]`. Equals the diagonal of
/// [`d_matrix`] for every field; the off-diagonals vanish only for fields
/// symmetric about their centroid.
pub fn d_diagonal(field: &DisplacementField) -> Vector3 {
    let c = field.centroid();
    let mut sq = Vector3::zeros();
    for p in field.positions() {
        let q = p - c;
        sq += q.component_mul(&q);
    }
    Vector3::new(sq.y + sq.z, sq.x + sq.z, sq.x + sq.y)
}

/// Closed forms for the diagonal entry `d` of a uniformly meshed cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicD {
    /// `a² n (∛n + 1) / (6 (∛n - 1))`, consistent with direct summation.
    pub corrected: f64,
    /// `a² n (∛n - 1) / (6 (∛n + 1))`, the ratio as commonly printed.
    pub printed: f64,
}

fn exact_root(n: usize, power: u32) -> Option<usize> {
    let guess = (n as f64).powf(1.0 / power as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&m| m.checked_pow(power) == Some(n))
}

/// `d` for a cube of edge `a` meshed with `n = m³` nodes (`D = d I`).
pub fn d_cubic_closed_form(a: f64, n: usize) -> Result<CubicD> {
    let m = exact_root(n, 3)
        .filter(|&m| m >= 2)
        .ok_or_else(|| Error::InvalidInput(format!("{n} is not a perfect cube of at least 8")))?;
    let (a2n, m) = (a * a * n as f64, m as f64);
    Ok(CubicD {
        corrected: a2n * (m + 1.0) / (6.0 * (m - 1.0)),
        printed: a2n * (m - 1.0) / (6.0 * (m + 1.0)),
    })
}

/// `d` for a square of edge `a` meshed with `n = m²` nodes, lying
/// perpendicular to an axis; `D = diag[d, d/2, d/2]` with the first entry
/// belonging to the normal axis.
pub fn d_planar_closed_form(a: f64, n: usize) -> Result<f64> {
    let m = exact_root(n, 2)
        .filter(|&m| m >= 2)
        .ok_or_else(|| Error::InvalidInput(format!("{n} is not a perfect square of at least 4")))?;
    let m = m as f64;
    Ok(a * a * n as f64 * (m + 1.0) / (6.0 * (m - 1.0)))
}

/// Procrustes (SVD) estimate with the chosen angle-extraction rule.
pub fn estimate_svd(field: &DisplacementField, variant: SvdVariant) -> Result<EstimatorOutput> {
    check_node_count(field)?;
    check_conditioning(&d_matrix(field))?;

    let pc = field.centroid();
    let dm = field.mean_displacement();
    let cross: Matrix3 = field
        .nodes()
        .iter()
        .map(|n| {
            let p_hat = n.p - pc;
            let g_hat = p_hat + (n.dp - dm);
            p_hat * g_hat.transpose()
        })
        .sum();

    let svd = cross.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::RotationUnidentifiable("SVD did not converge".into()));
    };
    let v = v_t.transpose();
    let mut correction = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        let weakest = svd.singular_values.imin();
        correction[(weakest, weakest)] = -1.0;
    }
    let r = v * correction * u.transpose();

    let t = dm - (r * pc - pc);
    let residuals = field
        .nodes()
        .iter()
        .map(|n| n.dp - ((r * n.p - n.p) + t))
        .collect();
    let deflection = RigidDeflection::new(t, variant.extract(&r));
    Ok(EstimatorOutput::new(deflection, Some(r), residuals))
}

/// Linearised least-squares estimate, solved about the centroid.
pub fn estimate_lin(field: &DisplacementField) -> Result<EstimatorOutput> {
    check_node_count(field)?;
    let d = d_matrix(field);
    check_conditioning(&d)?;

    let pc = field.centroid();
    let t_c = field.mean_displacement();
    let rhs: Vector3 = field
        .nodes()
        .iter()
        .map(|n| skew_neg(&(n.p - pc)).transpose() * (n.dp - t_c))
        .sum();
    let phi = d
        .cholesky()
        .ok_or_else(|| {
            Error::RotationUnidentifiable("normal matrix is not positive definite".into())
        })?
        .solve(&rhs);

    let residuals = field
        .nodes()
        .iter()
        .map(|n| n.dp - t_c - phi.cross(&(n.p - pc)))
        .collect();
    let t_ref = t_c + phi.cross(&(field.reference_point() - pc));
    Ok(EstimatorOutput::new(
        RigidDeflection::new(t_ref, phi),
        None,
        residuals,
    ))
}

/// Linearised least-squares estimate through the full 6x6 normal equations
/// at the reference point.
pub fn estimate_lin_full(field: &DisplacementField) -> Result<EstimatorOutput> {
    check_node_count(field)?;
    let mut normal = Matrix6::zeros();
    let mut rhs = Vector6::zeros();
    for n in field.nodes() {
        let p = skew_neg(&n.p);
        let pt = p.transpose();
        let mut block = normal.fixed_view_mut::<3, 3>(0, 0);
        block += Matrix3::identity();
        let mut block = normal.fixed_view_mut::<3, 3>(0, 3);
        block += p;
        let mut block = normal.fixed_view_mut::<3, 3>(3, 0);
        block += pt;
        let mut block = normal.fixed_view_mut::<3, 3>(3, 3);
        block += pt * p;
        let mut top = rhs.fixed_rows_mut::<3>(0);
        top += n.dp;
        let mut bottom = rhs.fixed_rows_mut::<3>(3);
        bottom += pt * n.dp;
    }
    let eig = SymmetricEigen::new(normal).eigenvalues;
    let (min, max) = (eig.min(), eig.max());
    if max.is_nan() || max <= 0.0 || min <= max / MAX_CONDITION {
        return Err(Error::RotationUnidentifiable(format!(
            "6x6 normal matrix eigenvalues span [{min:e}, {max:e}]"
        )));
    }
    let solution = normal
        .cholesky()
        .ok_or_else(|| {
            Error::RotationUnidentifiable("normal matrix is not positive definite".into())
        })?
        .solve(&rhs);
    let deflection = RigidDeflection::from_vector6(&solution);
    let residuals = field
        .nodes()
        .iter()
        .map(|n| n.dp - deflection.t - skew_neg(&n.p) * deflection.phi)
        .collect();
    Ok(EstimatorOutput::new(deflection, None, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Node;
    use crate::fieldgen::{add_noise, apply_rigid, make_grid, Axis, GridSpec, NoiseSpec};
    use crate::geometry::{small_rotation, RotationModel};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube() -> DisplacementField {
        make_grid(&GridSpec::cubic(10.0, 1.0)).unwrap()
    }

    fn random_cloud(n: usize, seed: u64) -> DisplacementField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = (0..n)
            .map(|_| {
                let p = Vector3::new(
                    rng.random_range(-4.0..6.0),
                    rng.random_range(-3.0..5.0),
                    rng.random_range(-7.0..2.0),
                );
                let dp = Vector3::new(
                    rng.random_range(-1e-3..1e-3),
                    rng.random_range(-1e-3..1e-3),
                    rng.random_range(-1e-3..1e-3),
                );
                Node::new(p, dp)
            })
            .collect();
        DisplacementField::new(Vector3::new(0.5, -0.2, 0.1), nodes).unwrap()
    }

    fn deg(v: Vector3) -> Vector3 {
        v.map(f64::to_degrees)
    }

    #[test]
    fn svd_recovers_large_translation() {
        let t = Vector3::new(10.0, 10.0, 10.0);
        let field = apply_rigid(&cube(), &t, &Vector3::zeros(), RotationModel::Exact);
        for variant in [SvdVariant::Plus, SvdVariant::Minus, SvdVariant::Avg] {
            let out = estimate_svd(&field, variant).unwrap();
            assert!((out.deflection.t - t).amax() <= 1e-13);
        }
    }

    #[test]
    fn lin_recovers_large_translation() {
        let t = Vector3::new(10.0, 10.0, 10.0);
        let field = apply_rigid(&cube(), &t, &Vector3::zeros(), RotationModel::Exact);
        let out = estimate_lin(&field).unwrap();
        assert!((out.deflection.t - t).amax() <= 1e-13);
    }

    #[test]
    fn svd_avg_rotation_error_at_one_degree() {
        let b = 1.0f64.to_radians();
        let phi = Vector3::new(b, b, b);
        let field = apply_rigid(&cube(), &Vector3::zeros(), &phi, RotationModel::Sequential);
        let out = estimate_svd(&field, SvdVariant::Avg).unwrap();
        let err = deg(out.deflection.phi - phi).amax();
        assert!(err > 1e-2 / 3.0 && err < 3e-2, "error {err} deg");
    }

    #[test]
    fn lin_rotation_error_at_hundredth_degree() {
        let b = 0.01f64.to_radians();
        let phi = Vector3::new(b, b, b);
        let field = apply_rigid(&cube(), &Vector3::zeros(), &phi, RotationModel::Sequential);
        let out = estimate_lin(&field).unwrap();
        let err = deg(out.deflection.phi - phi).amax();
        assert!(err > 1e-6 / 3.0 && err < 3e-6, "error {err} deg");
    }

    #[test]
    fn zero_field_gives_zero_everything() {
        let field = cube();
        for out in [
            estimate_svd(&field, SvdVariant::Avg).unwrap(),
            estimate_lin(&field).unwrap(),
            estimate_lin_full(&field).unwrap(),
        ] {
            assert_eq!(out.deflection.t, Vector3::zeros());
            assert!(out.deflection.phi.amax() == 0.0);
            assert_eq!(out.residual_sum_sq, 0.0);
        }
    }

    #[test]
    fn collinear_and_tiny_fields_rejected() {
        let line = DisplacementField::new(
            Vector3::zeros(),
            (0..5)
                .map(|i| Node::new(Vector3::new(i as f64, 0.0, 0.0), Vector3::zeros()))
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            estimate_lin(&line),
            Err(Error::RotationUnidentifiable(_))
        ));
        assert!(matches!(
            estimate_svd(&line, SvdVariant::Avg),
            Err(Error::RotationUnidentifiable(_))
        ));
        assert!(matches!(
            estimate_lin_full(&line),
            Err(Error::RotationUnidentifiable(_))
        ));
    }

    #[test]
    fn svd_rotation_is_proper_under_reflective_noise() {
        // Nearly planar field with noise much larger than the thickness: the
        // unconstrained Procrustes solution tends to flip the thin axis.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50 {
            let nodes = (0..20)
                .map(|_| {
                    let p = Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1e-3..1e-3),
                    );
                    Node::new(p, Vector3::zeros())
                })
                .collect();
            let field = DisplacementField::new(Vector3::zeros(), nodes).unwrap();
            let noisy = add_noise(&field, &NoiseSpec::new(0.05, trial)).unwrap();
            let out = estimate_svd(&noisy, SvdVariant::Avg).unwrap();
            let r = out.rotation_matrix.unwrap();
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lin_matches_full_normal_equations() {
        for seed in 0..20 {
            let field = random_cloud(40, seed);
            let a = estimate_lin(&field).unwrap();
            let b = estimate_lin_full(&field).unwrap();
            let scale = a.deflection.to_vector6().amax();
            assert!(
                (a.deflection.to_vector6() - b.deflection.to_vector6()).amax() <= 1e-10 * scale
            );
            assert!((a.residual_sum_sq - b.residual_sum_sq).abs() <= 1e-10 * a.residual_sum_sq);
        }
    }

    #[test]
    fn full_solver_decouples_on_symmetric_field() {
        let t = Vector3::new(0.2, -0.1, 0.05);
        let field = apply_rigid(&cube(), &t, &Vector3::zeros(), RotationModel::Exact);
        let out = estimate_lin_full(&field).unwrap();
        assert!(out.deflection.phi.amax() < 1e-15);
        assert!((out.deflection.t - t).amax() < 1e-12);
    }

    #[test]
    fn full_solver_recovers_linearized_motion() {
        let field = random_cloud(60, 7);
        let t = Vector3::new(0.01, -0.03, 0.02);
        let phi = Vector3::new(2e-4, -1e-4, 3e-4);
        let moved = apply_rigid(&field, &t, &phi, RotationModel::Linearized);
        for out in [
            estimate_lin_full(&moved).unwrap(),
            estimate_lin(&moved).unwrap(),
        ] {
            assert!((out.deflection.t - t).amax() <= 1e-12 * t.amax());
            assert!((out.deflection.phi - phi).amax() <= 1e-12 * phi.amax());
        }
    }

    #[test]
    fn d_matrix_on_cube_and_plane() {
        let d = d_matrix(&cube());
        assert_eq!(d, Matrix3::from_diagonal_element(26620.0));
        let plane = make_grid(&GridSpec::planar(10.0, 1.0, Axis::X)).unwrap();
        let d = d_matrix(&plane);
        assert_eq!(d[(1, 1)], d[(0, 0)] / 2.0);
        assert_eq!(d[(2, 2)], d[(0, 0)] / 2.0);
        assert_eq!(d.trace(), 2.0 * d[(0, 0)]);
        assert!(d.iter().enumerate().all(|(i, v)| i % 4 == 0 || *v == 0.0));
    }

    #[test]
    fn d_matrix_single_node_is_zero() {
        let nodes = vec![Node::new(Vector3::new(1.0, 2.0, 3.0), Vector3::zeros()); 3];
        let field = DisplacementField::new(Vector3::new(1.0, 2.0, 3.0), nodes).unwrap();
        assert_eq!(d_matrix(&field), Matrix3::zeros());
    }

    #[test]
    fn cubic_closed_forms() {
        let d = d_cubic_closed_form(10.0, 1331).unwrap();
        assert!((d.corrected - 26620.0).abs() < 1e-9);
        assert!((d.printed - 18486.1).abs() < 0.05);
        assert_eq!(d_cubic_closed_form(10.0, 8).unwrap().corrected, 400.0);
        assert!(d_cubic_closed_form(10.0, 1000 + 1).is_err());
        assert!(d_cubic_closed_form(10.0, 1).is_err());
    }

    #[test]
    fn two_by_two_cube_by_hand() {
        let field = make_grid(&GridSpec::cubic(10.0, 10.0)).unwrap();
        assert_eq!(field.len(), 8);
        assert_eq!(d_matrix(&field), Matrix3::from_diagonal_element(400.0));
    }

    #[test]
    fn planar_closed_form() {
        let plane = make_grid(&GridSpec::planar(10.0, 1.0, Axis::X)).unwrap();
        let d = d_planar_closed_form(10.0, plane.len()).unwrap();
        assert!((d - d_matrix(&plane)[(0, 0)]).abs() <= 1e-9 * d);
        assert!(d_planar_closed_form(10.0, 120).is_err());
    }

    #[test]
    fn small_rotation_extraction_is_exact() {
        let phi = Vector3::new(1e-3, -2e-3, 5e-4);
        let r = small_rotation(&phi);
        for v in [SvdVariant::Plus, SvdVariant::Minus, SvdVariant::Avg] {
            assert_eq!(v.extract(&r), phi);
        }
    }

    #[test]
    fn estimators_agree_on_symmetric_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let phi = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize()
                * rng.random_range(0.0..0.002);
            let t = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let field = apply_rigid(&cube(), &t, &phi, RotationModel::Exact);
            let lin = estimate_lin(&field).unwrap();
            let svd = estimate_svd(&field, SvdVariant::Avg).unwrap();
            assert!((lin.deflection.phi - svd.deflection.phi).norm() <= 1e-8);
            assert!((lin.deflection.t - svd.deflection.t).norm() <= 1e-10);
        }
    }

    #[test]
    fn parse_estimator_names() {
        assert_eq!("svd±".parse::<Estimator>().unwrap(), Estimator::SvdAvg);
        assert_eq!("svd+-".parse::<Estimator>().unwrap(), Estimator::SvdAvg);
        assert_eq!("lin".parse::<Estimator>().unwrap(), Estimator::Lin);
        assert!("ransac".parse::<Estimator>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn residual_sum_matches_residuals(seed in 0u64..1000) {
            let field = random_cloud(25, seed);
            for out in [estimate_lin(&field).unwrap(), estimate_svd(&field, SvdVariant::Avg).unwrap()] {
                let direct: f64 = out.per_node_residuals.iter().map(|r| r.norm_squared()).sum();
                prop_assert!((direct - out.residual_sum_sq).abs() <= 1e-12 * direct.max(f64::MIN_POSITIVE));
            }
        }

        #[test]
        fn translation_equivariance(seed in 0u64..1000, cx in -1.0f64..1.0, cy in -1.0f64..1.0, cz in -1.0f64..1.0) {
            let field = random_cloud(25, seed);
            let c = Vector3::new(cx, cy, cz);
            let shifted = field.map_displacements(|_, n| n.dp + c);
            for est in Estimator::ALL {
                let a = est.estimate(&field).unwrap();
                let b = est.estimate(&shifted).unwrap();
                prop_assert!((b.deflection.t - a.deflection.t - c).amax() <= 1e-12);
                prop_assert!((b.deflection.phi - a.deflection.phi).amax() <= 1e-12);
            }
        }

        #[test]
        fn lin_is_least_squares_optimal(seed in 0u64..1000, dir in 0usize..6, sign in prop::bool::ANY) {
            let field = random_cloud(25, seed);
            let out = estimate_lin(&field).unwrap();
            let mut params = out.deflection.to_vector6();
            params[dir] += if sign { 1e-6 } else { -1e-6 };
            let moved = RigidDeflection::from_vector6(&params);
            let f: f64 = field
                .nodes()
                .iter()
                .map(|n| (n.dp - moved.t - moved.phi.cross(&n.p)).norm_squared())
                .sum();
            prop_assert!(f > out.residual_sum_sq);
        }

        #[test]
        fn d_matrix_matches_naive_sum(seed in 0u64..1000) {
            let field = random_cloud(30, seed);
            let c = field.centroid();
            let mut naive = Matrix3::zeros();
            for p in field.positions() {
                let s = skew_neg(&(p - c));
                naive += s.transpose() * s;
            }
            let d = d_matrix(&field);
            prop_assert!((d - naive).amax() <= 1e-9 * naive.amax());
            let diag = d_diagonal(&field);
            prop_assert!((d.diagonal() - diag).amax() <= 1e-9 * diag.amax());
        }
    }
}
