//! Geometric primitives and small-rotation algebra.
//!
//! Units are fixed crate-wide: millimetres for positions and translations,
//! radians for rotation vectors, newtons and newton-millimetres for loads.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
pub type Vector6 = nalgebra::Vector6<f64>;
pub type Matrix6 = nalgebra::Matrix6<f64>;

/// Rotation magnitude above which the linear deflection model is considered
/// questionable.
pub const SMALL_ROTATION_LIMIT: f64 = 0.02;

/// Skew-symmetric matrix `P` of `p` laid out so that `P * v == v x p`.
pub fn skew_neg(p: &Vector3) -> Matrix3 {
    Matrix3::new(
        0.0, p.z, -p.y, //
        -p.z, 0.0, p.x, //
        p.y, -p.x, 0.0,
    )
}

/// First-order rotation matrix `I + [phi]x`.
pub fn small_rotation(phi: &Vector3) -> Matrix3 {
    Matrix3::new(
        1.0, -phi.z, phi.y, //
        phi.z, 1.0, -phi.x, //
        -phi.y, phi.x, 1.0,
    )
}

/// Proper rotation by angle `|phi|` about axis `phi / |phi|`.
pub fn exact_rotation(phi: &Vector3) -> Matrix3 {
    Rotation3::new(*phi).into_inner()
}

/// Product of elementary rotations `Rx(phi.x) * Ry(phi.y) * Rz(phi.z)`.
pub fn sequential_rotation(phi: &Vector3) -> Matrix3 {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), phi.x);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), phi.y);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), phi.z);
    (rx * ry * rz).into_inner()
}

/// How a rotation vector is turned into a rotation matrix when synthesising
/// displacement fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RotationModel {
    /// Axis-angle (rotation vector).
    #[default]
    Exact,
    /// Elementary rotations about x, then y, then z.
    Sequential,
    /// First-order `I + [phi]x`; not orthogonal.
    Linearized,
}

impl RotationModel {
    pub fn matrix(self, phi: &Vector3) -> Matrix3 {
        match self {
            RotationModel::Exact => exact_rotation(phi),
            RotationModel::Sequential => sequential_rotation(phi),
            RotationModel::Linearized => small_rotation(phi),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RotationModel::Exact => "exact",
            RotationModel::Sequential => "sequential",
            RotationModel::Linearized => "linearized",
        }
    }
}

impl std::str::FromStr for RotationModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(RotationModel::Exact),
            "sequential" => Ok(RotationModel::Sequential),
            "linearized" => Ok(RotationModel::Linearized),
            other => Err(format!(
                "unknown rotation model `{other}` (expected exact, sequential or linearized)"
            )),
        }
    }
}

/// Translational (`t`, mm) and rotational (`phi`, rad) deflection of a
/// reference frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidDeflection {
    pub t: Vector3,
    pub phi: Vector3,
}

impl RigidDeflection {
    pub fn new(t: Vector3, phi: Vector3) -> Self {
        Self { t, phi }
    }

    pub fn from_vector6(v: &Vector6) -> Self {
        Self {
            t: v.fixed_rows::<3>(0).into_owned(),
            phi: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector6(&self) -> Vector6 {
        Vector6::new(
            self.t.x, self.t.y, self.t.z, self.phi.x, self.phi.y, self.phi.z,
        )
    }

    pub fn phi_deg(&self) -> Vector3 {
        self.phi.map(f64::to_degrees)
    }

    pub fn is_finite(&self) -> bool {
        self.t.iter().chain(self.phi.iter()).all(|v| v.is_finite())
    }

    /// True when `|phi|` is within the range where the linear model holds.
    pub fn is_small(&self) -> bool {
        self.phi.norm() < SMALL_ROTATION_LIMIT
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn skew_neg_zero_and_pattern() {
        assert_eq!(skew_neg(&Vector3::zeros()), Matrix3::zeros());
        let p = skew_neg(&Vector3::new(1.0, 2.0, 3.0));
        let expected = Matrix3::new(0.0, 3.0, -2.0, -3.0, 0.0, 1.0, 2.0, -1.0, 0.0);
        assert_eq!(p, expected);
    }

    #[test]
    fn skew_neg_is_reversed_cross_product() {
        let p = Vector3::new(1.0, 0.0, 0.0);
        let v = Vector3::new(0.0, 1.0, 0.0);
        assert_eq!(skew_neg(&p) * v, Vector3::new(0.0, 0.0, -1.0));
        assert_eq!(skew_neg(&p) * v, v.cross(&p));
    }

    #[test]
    fn small_rotation_pattern() {
        assert_eq!(small_rotation(&Vector3::zeros()), Matrix3::identity());
        let theta = 0.003;
        let r = small_rotation(&Vector3::new(0.0, 0.0, theta));
        assert_eq!(r[(1, 0)], theta);
        assert_eq!(r[(0, 1)], -theta);
        assert_eq!(r.diagonal(), Vector3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn exact_rotation_quarter_turn() {
        assert_eq!(exact_rotation(&Vector3::zeros()), Matrix3::identity());
        let r = exact_rotation(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let mapped = r * Vector3::x();
        assert_relative_eq!(mapped, Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn exact_rotation_matches_first_order_for_tiny_angles() {
        let phi = Vector3::new(0.6, -0.3, 0.74).normalize() * 1e-4;
        let diff = exact_rotation(&phi) - small_rotation(&phi);
        assert!(diff.amax() < 1e-8, "max diff {}", diff.amax());
    }

    #[test]
    fn sequential_rotation_is_elementary_product() {
        let a = 0.1;
        let r = sequential_rotation(&Vector3::new(a, 0.0, 0.0));
        assert_relative_eq!(r[(2, 1)], a.sin(), epsilon = 1e-16);
        let r = sequential_rotation(&Vector3::new(0.0, 0.0, a));
        assert_relative_eq!(
            r,
            exact_rotation(&Vector3::new(0.0, 0.0, a)),
            epsilon = 1e-16
        );
    }

    fn vec3(range: f64) -> impl Strategy<Value = Vector3> {
        (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn skew_neg_antisymmetric_and_cross(p in vec3(100.0), v in vec3(1.0)) {
            let m = skew_neg(&p);
            prop_assert_eq!(m.transpose(), -m);
            let diff = (m * v - v.cross(&p)).amax();
            prop_assert!(diff <= 1e-13 * (1.0 + p.amax()));
        }

        #[test]
        fn small_rotation_acts_as_cross(phi in vec3(0.01), p in vec3(10.0)) {
            let lhs = (small_rotation(&phi) - Matrix3::identity()) * p;
            let rhs = phi.cross(&p);
            prop_assert!((lhs - rhs).amax() <= 1e-15);
        }

        #[test]
        fn exact_and_sequential_are_proper(phi in vec3(3.0)) {
            for r in [exact_rotation(&phi), sequential_rotation(&phi)] {
                let ortho = (r.transpose() * r - Matrix3::identity()).amax();
                prop_assert!(ortho < 1e-12);
                prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
        }
    }
}
