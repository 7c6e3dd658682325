//! Displacement fields: node positions around a reference point together with
//! their displacement vectors.

use crate::error::{Error, Result};
use crate::geometry::Vector3;

/// Minimum node count for any field.
pub const MIN_NODES: usize = 3;

/// A node position and its displacement under load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub p: Vector3,
    pub dp: Vector3,
}

impl Node {
    pub fn new(p: Vector3, dp: Vector3) -> Self {
        Self { p, dp }
    }
}

/// Set of node positions and displacements, stored relative to the
/// reference point.
///
/// `origin` remembers where the reference point sat in the frame the nodes
/// were supplied in, so fields can be written back in that frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    nodes: Vec<Node>,
    origin: Vector3,
}

impl DisplacementField {
    /// Builds a field from nodes given in the same frame as `reference_point`.
    /// Positions are re-expressed relative to the reference point.
    pub fn new(reference_point: Vector3, nodes: Vec<Node>) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::InsufficientData {
                needed: MIN_NODES,
                got: nodes.len(),
            });
        }
        if !reference_point.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("reference point is not finite".into()));
        }
        let mut nodes = nodes;
        for (i, node) in nodes.iter_mut().enumerate() {
            if !node.p.iter().chain(node.dp.iter()).all(|v| v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "node {i} has non-finite values"
                )));
            }
            if reference_point != Vector3::zeros() {
                node.p -= reference_point;
            }
        }
        Ok(Self {
            nodes,
            origin: reference_point,
        })
    }

    /// Builds a field whose positions are already relative to the reference
    /// point, which sat at `origin` in the source frame.
    pub fn from_relative(origin: Vector3, nodes: Vec<Node>) -> Result<Self> {
        let mut field = Self::new(Vector3::zeros(), nodes)?;
        field.origin = origin;
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// The reference point in the field's own frame: always the origin.
    pub fn reference_point(&self) -> Vector3 {
        Vector3::zeros()
    }

    /// Location of the reference point in the frame the field was built from.
    pub fn origin(&self) -> Vector3 {
        self.origin
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vector3> + '_ {
        self.nodes.iter().map(|n| &n.p)
    }

    pub fn displacements(&self) -> impl Iterator<Item = &Vector3> + '_ {
        self.nodes.iter().map(|n| &n.dp)
    }

    pub fn centroid(&self) -> Vector3 {
        mean(self.positions())
    }

    pub fn mean_displacement(&self) -> Vector3 {
        mean(self.displacements())
    }

    /// Returns a copy with displacements replaced by `f(index, node)`.
    pub fn map_displacements(&self, mut f: impl FnMut(usize, &Node) -> Vector3) -> Self {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| Node::new(n.p, f(i, n)))
            .collect();
        Self {
            nodes,
            origin: self.origin,
        }
    }

    /// Returns a copy without the nodes at `removed` (indices into this field).
    pub fn without(&self, removed: &[usize]) -> Result<Self> {
        let mut keep = vec![true; self.nodes.len()];
        for &i in removed {
            if i < keep.len() {
                keep[i] = false;
            }
        }
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .zip(&keep)
            .filter_map(|(n, &k)| k.then_some(*n))
            .collect();
        Self::from_relative(self.origin, nodes)
    }

    /// True when every node lies on one line (or coincides).
    pub fn is_collinear(&self) -> bool {
        let c = self.centroid();
        let spread: Vec<Vector3> = self.positions().map(|p| p - c).collect();
        let scale = spread.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return true;
        }
        let Some(dir) = spread.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
            return true;
        };
        let dir = dir / dir.norm();
        spread.iter().all(|v| v.cross(&dir).norm() <= 1e-12 * scale)
    }
}

pub(crate) fn mean<'a>(values: impl Iterator<Item = &'a Vector3>) -> Vector3 {
    let mut sum = Vector3::zeros();
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        sum
    } else {
        sum / n as f64
    }
}
