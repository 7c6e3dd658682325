//! Synthetic displacement fields: uniform grids, rigid motion, Gaussian noise
//! and outlier injection.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::compliance::LoadCase;
use crate::error::{Error, Result};
use crate::field::{DisplacementField, Node};
use crate::geometry::{Matrix6, RigidDeflection, RotationModel, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Cubic,
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Uniform grid of nodes centred on a reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    /// Edge length `a` in mm.
    pub extent: f64,
    /// Mesh step `h` in mm.
    pub step: f64,
    /// Plane normal for planar grids.
    #[serde(default)]
    pub normal_axis: Axis,
    #[serde(default = "zero_vec", with = "vec3_array")]
    pub center: Vector3,
}

fn zero_vec() -> Vector3 {
    Vector3::zeros()
}

pub(crate) mod vec3_array {
    use super::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vector3::new(x, y, z))
    }
}

impl GridSpec {
    pub fn cubic(extent: f64, step: f64) -> Self {
        Self {
            kind: GridKind::Cubic,
            extent,
            step,
            normal_axis: Axis::X,
            center: Vector3::zeros(),
        }
    }

    pub fn planar(extent: f64, step: f64, normal_axis: Axis) -> Self {
        Self {
            kind: GridKind::Planar,
            extent,
            step,
            normal_axis,
            center: Vector3::zeros(),
        }
    }

    pub fn with_center(mut self, center: Vector3) -> Self {
        self.center = center;
        self
    }

    /// Number of intervals per axis, `a / h`.
    pub fn intervals(&self) -> Result<usize> {
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid extent must be positive, got {}",
                self.extent
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid step must be positive, got {}",
                self.step
            )));
        }
        let ratio = self.extent / self.step;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "grid extent {} is not an integer multiple of step {}",
                self.extent, self.step
            )));
        }
        Ok(rounded as usize)
    }

    pub fn points_per_axis(&self) -> Result<usize> {
        Ok(self.intervals()? + 1)
    }

    pub fn node_count(&self) -> Result<usize> {
        let m = self.points_per_axis()?;
        Ok(match self.kind {
            GridKind::Cubic => m * m * m,
            GridKind::Planar => m * m,
        })
    }
}

/// Per-component Gaussian noise level and RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation per displacement component, mm.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { sigma, seed }
    }

    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            seed: 0,
        }
    }

    /// Same noise level with the seed offset by `trial`.
    pub fn for_trial(&self, trial: u64) -> Self {
        Self {
            sigma: self.sigma,
            seed: self.seed.wrapping_add(trial),
        }
    }
}

/// FE-modelling noise levels measured for different mesh types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisePreset {
    Linear2mm,
    Linear1mm,
    Parabolic3mm,
    Parabolic2mm,
}

impl NoisePreset {
    pub const ALL: [NoisePreset; 4] = [
        NoisePreset::Linear2mm,
        NoisePreset::Linear1mm,
        NoisePreset::Parabolic3mm,
        NoisePreset::Parabolic2mm,
    ];

    pub fn sigma(self) -> f64 {
        match self {
            NoisePreset::Linear2mm => 4.59e-5,
            NoisePreset::Linear1mm => 3.87e-5,
            NoisePreset::Parabolic3mm => 5.26e-5,
            NoisePreset::Parabolic2mm => 5.60e-5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoisePreset::Linear2mm => "linear-2mm",
            NoisePreset::Linear1mm => "linear-1mm",
            NoisePreset::Parabolic3mm => "parabolic-3mm",
            NoisePreset::Parabolic2mm => "parabolic-2mm",
        }
    }
}

impl std::str::FromStr for NoisePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoisePreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown noise preset `{s}`"))
    }
}

/// Uniform grid centred on `spec.center` with zero displacements.
pub fn make_grid(spec: &GridSpec) -> Result<DisplacementField> {
    let m = spec.intervals()?;
    let coord = |k: usize| k as f64 * spec.step - 0.5 * spec.extent;
    let mut nodes = Vec::with_capacity(spec.node_count()?);
    match spec.kind {
        GridKind::Cubic => {
            for i in 0..=m {
                for j in 0..=m {
                    for k in 0..=m {
                        let p = Vector3::new(coord(i), coord(j), coord(k));
                        nodes.push(Node::new(p, Vector3::zeros()));
                    }
                }
            }
        }
        GridKind::Planar => {
            let normal = spec.normal_axis.index();
            let (u, v) = ((normal + 1) % 3, (normal + 2) % 3);
            for i in 0..=m {
                for j in 0..=m {
                    let mut p = Vector3::zeros();
                    p[u] = coord(i);
                    p[v] = coord(j);
                    nodes.push(Node::new(p, Vector3::zeros()));
                }
            }
        }
    }
    DisplacementField::from_relative(spec.center, nodes)
}

/// Replaces displacements by the rigid motion `dp = R(phi) p + t - p`.
pub fn apply_rigid(
    field: &DisplacementField,
    t: &Vector3,
    phi: &Vector3,
    model: RotationModel,
) -> DisplacementField {
    let r = model.matrix(phi);
    field.map_displacements(|_, n| match model {
        RotationModel::Linearized => phi.cross(&n.p) + t,
        _ => (r * n.p - n.p) + t,
    })
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every displacement component.
pub fn add_noise(field: &DisplacementField, noise: &NoiseSpec) -> Result<DisplacementField> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise sigma must be non-negative, got {}",
            noise.sigma
        )));
    }
    if noise.sigma == 0.0 {
        return Ok(field.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    Ok(field.map_displacements(|_, n| {
        let eps = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        n.dp + eps * noise.sigma
    }))
}

/// Perturbs one component of `floor(fraction * n)` random nodes by
/// `+-magnitude * sigma`. Returns the field and the sorted perturbed indices.
pub fn inject_outliers(
    field: &DisplacementField,
    fraction: f64,
    magnitude: f64,
    sigma: f64,
    seed: u64,
) -> Result<(DisplacementField, Vec<usize>)> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(Error::InvalidInput(format!(
            "outlier fraction must be in [0, 0.5), got {fraction}"
        )));
    }
    let n = field.len();
    let count = (fraction * n as f64).floor() as usize;
    if count == 0 {
        return Ok((field.clone(), Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let mut kicks = vec![None; n];
    for &i in &chosen {
        let component = rng.random_range(0..3usize);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        kicks[i] = Some((component, sign * magnitude * sigma));
    }
    let out = field.map_displacements(|i, node| {
        let mut dp = node.dp;
        if let Some((c, delta)) = kicks[i] {
            dp[c] += delta;
        }
        dp
    });
    Ok((out, chosen))
}

/// One synthetic load experiment: deflection `k * w`, rigid motion of the
/// grid, then noise.
pub fn simulate_experiment(
    true_k: &Matrix6,
    load: &LoadCase,
    grid: &GridSpec,
    noise: &NoiseSpec,
    model: RotationModel,
) -> Result<DisplacementField> {
    if !true_k.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(
            "compliance matrix has non-finite entries".into(),
        ));
    }
    let deflection = RigidDeflection::from_vector6(&(true_k * load.wrench()));
    let field = make_grid(grid)?;
    let moved = apply_rigid(&field, &deflection.t, &deflection.phi, model);
    add_noise(&moved, noise)
}
