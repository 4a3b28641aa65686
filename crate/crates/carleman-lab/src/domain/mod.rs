//! Computational domain, tensor grids and discrete fields.
//!
//! The phase space is `Omega x (0,T) x (0,a_max) x (tau_min,tau_max)`.
//! Axes are ordered `x0 (, x1), t, a, tau`, row-major with `tau` fastest.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod coeffs;
pub mod ops;

pub use coeffs::CoefficientSet;

/// Spatial habitat `Omega`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum SpatialDomain {
    Interval { lo: f64, hi: f64 },
    Rect { lo: [f64; 2], hi: [f64; 2] },
    /// Ball centered at the origin; grids cover the bounding box and
    /// membership is checked through [`SpatialDomain::contains`].
    Ball { dim: usize, radius: f64 },
}

impl SpatialDomain {
    pub fn dim(&self) -> usize {
        match self {
            SpatialDomain::Interval { .. } => 1,
            SpatialDomain::Rect { .. } => 2,
            SpatialDomain::Ball { dim, .. } => *dim,
        }
    }

    /// Bounding box, one (lo, hi) pair per spatial axis.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            SpatialDomain::Interval { lo, hi } => vec![(*lo, *hi)],
            SpatialDomain::Rect { lo, hi } => vec![(lo[0], hi[0]), (lo[1], hi[1])],
            SpatialDomain::Ball { dim, radius } => vec![(-radius, *radius); *dim],
        }
    }

    /// Membership in the closure `Omega-bar`.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            SpatialDomain::Interval { lo, hi } => x[0] >= *lo && x[0] <= *hi,
            SpatialDomain::Rect { lo, hi } => {
                (0..2).all(|k| x[k] >= lo[k] && x[k] <= hi[k])
            }
            SpatialDomain::Ball { dim, radius } => {
                x[..*dim].iter().map(|v| v * v).sum::<f64>() <= radius * radius
            }
        }
    }

    pub fn measure_positive(&self) -> bool {
        match self {
            SpatialDomain::Interval { lo, hi } => hi > lo,
            SpatialDomain::Rect { lo, hi } => hi[0] > lo[0] && hi[1] > lo[1],
            SpatialDomain::Ball { radius, .. } => *radius > 0.0,
        }
    }
}

/// The continuous domain data: `Omega`, time horizon, maximal age and the
/// size interval.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DomainSpec {
    pub spatial: SpatialDomain,
    pub t_max: f64,
    pub a_max: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) {
            return Err(Error::Grid(format!("non-positive time horizon {}", self.t_max)));
        }
        if !(self.a_max > 0.0) {
            return Err(Error::Grid(format!("non-positive maximal age {}", self.a_max)));
        }
        if !(self.tau_min < self.tau_max) {
            return Err(Error::Grid(format!(
                "empty size interval [{}, {}]",
                self.tau_min, self.tau_max
            )));
        }
        if !self.spatial.measure_positive() {
            return Err(Error::Grid("spatial domain has zero measure".into()));
        }
        Ok(())
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial.dim()
    }

    /// (lo, hi) per axis in grid order.
    pub fn axis_bounds(&self) -> Vec<(f64, f64)> {
        let mut b = self.spatial.bounds();
        b.push((0.0, self.t_max));
        b.push((0.0, self.a_max));
        b.push((self.tau_min, self.tau_max));
        b
    }
}

/// Per-axis node counts, in grid order (`x.., t, a, tau`).
pub type Resolution = Vec<usize>;

/// Uniform tensor grid over the closed phase-space box.
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: DomainSpec,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    strides: Vec<usize>,
}

/// Build a uniform tensor grid; every axis needs at least 3 nodes.
pub fn build_grid(spec: &DomainSpec, resolution: &[usize]) -> Result<Arc<Grid>> {
    spec.validate()?;
    let bounds = spec.axis_bounds();
    if resolution.len() != bounds.len() {
        return Err(Error::Grid(format!(
            "resolution has {} entries, expected {}",
            resolution.len(),
            bounds.len()
        )));
    }
    for (axis, &n) in resolution.iter().enumerate() {
        if n < 3 {
            return Err(Error::Grid(format!("node count < 3 on axis {axis} ({n})")));
        }
    }
    let shape = resolution.to_vec();
    let spacing: Vec<f64> = bounds
        .iter()
        .zip(&shape)
        .map(|(&(lo, hi), &n)| (hi - lo) / (n - 1) as f64)
        .collect();
    let origin: Vec<f64> = bounds.iter().map(|&(lo, _)| lo).collect();
    let mut strides = vec![1usize; shape.len()];
    for k in (0..shape.len() - 1).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    Ok(Arc::new(Grid {
        spec: spec.clone(),
        shape,
        spacing,
        origin,
        strides,
    }))
}

impl Grid {
    pub fn naxes(&self) -> usize {
        self.shape.len()
    }

    pub fn spatial_dim(&self) -> usize {
        self.spec.spatial_dim()
    }

    /// Axis indices of t, a, tau.
    pub fn t_axis(&self) -> usize {
        self.spatial_dim()
    }
    pub fn a_axis(&self) -> usize {
        self.spatial_dim() + 1
    }
    pub fn tau_axis(&self) -> usize {
        self.spatial_dim() + 2
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize, idx: &mut [usize]) {
        for k in 0..self.shape.len() {
            idx[k] = flat / self.strides[k];
            flat %= self.strides[k];
        }
    }

    /// Multi-index along one axis of a flat index.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.shape[axis]
    }

    /// Node coordinates of a flat index; `out` has `naxes` entries.
    pub fn coords(&self, flat: usize, out: &mut [f64]) {
        for k in 0..self.shape.len() {
            out[k] = self.coord(k, self.axis_index(flat, k));
        }
    }

    /// Trapezoid quadrature weight of a node (product of per-axis weights).
    pub fn quad_weight(&self, flat: usize) -> f64 {
        let mut w = 1.0;
        for k in 0..self.shape.len() {
            let i = self.axis_index(flat, k);
            let face = i == 0 || i == self.shape[k] - 1;
            w *= self.spacing[k] * if face { 0.5 } else { 1.0 };
        }
        w
    }

    /// Extent of axis `k`.
    pub fn extent(&self, k: usize) -> f64 {
        self.spacing[k] * (self.shape[k] - 1) as f64
    }
}

/// A discrete scalar function sampled on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<Grid>,
    pub data: Vec<f64>,
    pub label: Option<String>,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Field {
            grid,
            data: vec![0.0; n],
            label: None,
        }
    }

    pub fn from_data(grid: Arc<Grid>, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field length {} does not match grid size {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid,
            data,
            label: None,
        })
    }

    /// Sample a function of `(x, t, a, tau)` on every node.
    pub fn from_fn<F>(grid: Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64], f64, f64, f64) -> f64 + Sync,
    {
        let d = grid.spatial_dim();
        let naxes = grid.naxes();
        let mut data = vec![0.0; grid.len()];
        let g = grid.clone();
        crate::exec::fill_indexed(&mut data, |i| {
            let mut c = [0.0; 5];
            g.coords(i, &mut c[..naxes]);
            f(&c[..d], c[d], c[d + 1], c[d + 2])
        });
        Field {
            grid,
            data,
            label: None,
        }
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        for (v, o) in self.data.iter_mut().zip(&other.data) {
            *v += alpha * o;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Max abs difference to another field on the same grid.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Trapezoid-weighted L2 norm over the whole grid.
    pub fn l2_norm(&self) -> f64 {
        let g = &self.grid;
        let d = &self.data;
        crate::exec::sum_indexed(d.len(), |i| g.quad_weight(i) * d[i] * d[i]).sqrt()
    }
}
