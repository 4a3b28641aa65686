//! Model data: diffusion matrix, drift, reaction, growth modulus and the
//! birth kernel, plus the named preset registry and CSV-tabulated loading.

use std::path::Path;
use std::sync::Arc;

use crate::domain::Grid;
use crate::error::{Error, Result};

pub type SpatialMatrixFn = Arc<dyn Fn(&[f64]) -> [[f64; 2]; 2] + Send + Sync>;
pub type PhaseVectorFn = Arc<dyn Fn(&[f64], f64, f64, f64) -> [f64; 2] + Send + Sync>;
pub type PhaseScalarFn = Arc<dyn Fn(&[f64], f64, f64, f64) -> f64 + Send + Sync>;
pub type SizeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Birth kernel `beta(x, a, tau, tau_tilde)`.
pub type BirthFn = Arc<dyn Fn(&[f64], f64, f64, f64) -> f64 + Send + Sync>;

/// All coefficient data of the system. The diffusion matrix is stored as a
/// full 2x2 (1-D problems use entry `[0][0]` only); `growth_prime` is the
/// analytic derivative of the growth modulus — the growth term is never
/// differentiated numerically.
#[derive(Clone)]
pub struct CoefficientSet {
    pub name: String,
    pub diffusion: SpatialMatrixFn,
    pub drift: PhaseVectorFn,
    pub reaction: PhaseScalarFn,
    pub growth: SizeFn,
    pub growth_prime: SizeFn,
    pub birth_rate: BirthFn,
    /// Declared uniform ellipticity lower bound for the diffusion matrix.
    pub sigma1: f64,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("sigma1", &self.sigma1)
            .finish()
    }
}

impl CoefficientSet {
    /// Smallest eigenvalue of the (symmetric) diffusion matrix at `x`.
    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        let a = (self.diffusion)(x);
        if x.len() == 1 {
            a[0][0]
        } else {
            let tr = a[0][0] + a[1][1];
            let det_disc = ((a[0][0] - a[1][1]).powi(2) + 4.0 * a[0][1] * a[1][0]).sqrt();
            0.5 * (tr - det_disc)
        }
    }

    /// Verify symmetry, ellipticity and positivity of `g` by sampling on a
    /// grid's nodes.
    pub fn validate_on_grid(&self, grid: &Grid) -> Result<()> {
        let d = grid.spatial_dim();
        let mut x = vec![0.0; d];
        // x nodes (axes 0..d): walk the tensor product
        let x_count: usize = grid.shape[..d].iter().product();
        for flat in 0..x_count {
            let mut rem = flat;
            for k in (0..d).rev() {
                let i = rem % grid.shape[k];
                rem /= grid.shape[k];
                x[k] = grid.coord(k, i);
            }
            let a = (self.diffusion)(&x);
            if d == 2 && (a[0][1] - a[1][0]).abs() > 1e-12 {
                return Err(Error::Coefficients(format!(
                    "diffusion matrix not symmetric at x={x:?}"
                )));
            }
            let lam = self.min_eigenvalue(&x);
            if !lam.is_finite() {
                return Err(Error::Coefficients("non-finite diffusion entry".into()));
            }
            if lam < self.sigma1 - 1e-10 {
                return Err(Error::Coefficients(format!(
                    "ellipticity violated at x={x:?}: min eigenvalue {lam} < sigma1 {}",
                    self.sigma1
                )));
            }
        }
        let tau_axis = grid.tau_axis();
        for i in 0..grid.shape[tau_axis] {
            let tau = grid.coord(tau_axis, i);
            let g = (self.growth)(tau);
            if !(g > 0.0) {
                return Err(Error::Coefficients(format!(
                    "growth modulus not positive at tau={tau}: g={g}"
                )));
            }
        }
        Ok(())
    }
}

/// Minimum of `xi^T A(x) xi` over unit `xi` and sampled `x` (closed-form
/// eigenvalue per sample). Errors when the estimate is non-positive.
pub fn check_ellipticity(
    coeffs: &CoefficientSet,
    grid: &Grid,
    sample_count: usize,
) -> Result<f64> {
    if sample_count < 1 {
        return Err(Error::Coefficients("sample_count must be >= 1".into()));
    }
    let d = grid.spatial_dim();
    let bounds = grid.spec.spatial.bounds();
    let mut min = f64::INFINITY;
    let mut x = vec![0.0; d];
    // deterministic lattice sampling of the bounding box
    let per_axis = (sample_count as f64).powf(1.0 / d as f64).ceil() as usize;
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(d as u32);
    for flat in 0..total {
        let mut rem = flat;
        for k in 0..d {
            let i = rem % per_axis;
            rem /= per_axis;
            let (lo, hi) = bounds[k];
            x[k] = lo + (hi - lo) * i as f64 / (per_axis - 1) as f64;
        }
        if !grid.spec.spatial.contains(&x) {
            continue;
        }
        min = min.min(coeffs.min_eigenvalue(&x));
    }
    if !(min > 0.0) {
        return Err(Error::Coefficients(format!(
            "non-elliptic diffusion data: estimated sigma1 = {min}"
        )));
    }
    Ok(min)
}

fn constant_matrix(v: f64) -> SpatialMatrixFn {
    Arc::new(move |_x| [[v, 0.0], [0.0, v]])
}

fn zero_vector() -> PhaseVectorFn {
    Arc::new(|_x, _t, _a, _tau| [0.0, 0.0])
}

/// Builder-style construction used by presets and tests.
pub struct CoefficientBuilder {
    set: CoefficientSet,
}

impl CoefficientBuilder {
    pub fn new(name: &str) -> Self {
        CoefficientBuilder {
            set: CoefficientSet {
                name: name.to_string(),
                diffusion: constant_matrix(1.0),
                drift: zero_vector(),
                reaction: Arc::new(|_x, _t, _a, _tau| 0.0),
                growth: Arc::new(|_tau| 1.0),
                growth_prime: Arc::new(|_tau| 0.0),
                birth_rate: Arc::new(|_x, _a, _tau, _tt| 0.0),
                sigma1: 1.0,
            },
        }
    }

    pub fn diffusion(mut self, f: SpatialMatrixFn) -> Self {
        self.set.diffusion = f;
        self
    }
    pub fn diffusion_const(self, v: f64) -> Self {
        let mut s = self.diffusion(constant_matrix(v));
        s.set.sigma1 = v;
        s
    }
    pub fn drift(mut self, f: PhaseVectorFn) -> Self {
        self.set.drift = f;
        self
    }
    pub fn reaction(mut self, f: PhaseScalarFn) -> Self {
        self.set.reaction = f;
        self
    }
    pub fn reaction_const(self, v: f64) -> Self {
        self.reaction(Arc::new(move |_x, _t, _a, _tau| v))
    }
    pub fn growth(mut self, g: SizeFn, g_prime: SizeFn) -> Self {
        self.set.growth = g;
        self.set.growth_prime = g_prime;
        self
    }
    pub fn growth_const(self, v: f64) -> Self {
        self.growth(Arc::new(move |_| v), Arc::new(|_| 0.0))
    }
    pub fn birth(mut self, f: BirthFn) -> Self {
        self.set.birth_rate = f;
        self
    }
    pub fn birth_const(self, v: f64) -> Self {
        self.birth(Arc::new(move |_x, _a, _tau, _tt| v))
    }
    pub fn sigma1(mut self, v: f64) -> Self {
        self.set.sigma1 = v;
        self
    }
    pub fn build(self) -> CoefficientSet {
        self.set
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "constant",
    "logistic-growth",
    "separable-birth",
    "pure-diffusion",
    "pure-transport",
];

/// Look up a coefficient preset by name.
pub fn preset(name: &str) -> Result<CoefficientSet> {
    match name {
        "constant" => Ok(CoefficientBuilder::new("constant")
            .diffusion_const(0.1)
            .reaction_const(0.2)
            .growth_const(0.4)
            .birth_const(0.2)
            .build()),
        // growth modulus r*tau*(1 - tau/K) with capacity above tau_max so it
        // stays positive; mild space-dependent mortality
        "logistic-growth" => Ok(CoefficientBuilder::new("logistic-growth")
            .diffusion_const(0.1)
            .growth(
                Arc::new(|tau| 0.8 * (tau + 0.2) * (1.0 - tau / 2.0)),
                Arc::new(|tau| 0.8 * (1.0 - tau / 2.0) + 0.8 * (tau + 0.2) * (-0.5)),
            )
            .reaction(Arc::new(|x, _t, _a, _tau| 0.1 + 0.05 * (2.0 * x[0]).cos()))
            .birth_const(0.1)
            .build()),
        "separable-birth" => Ok(CoefficientBuilder::new("separable-birth")
            .diffusion_const(0.1)
            .growth_const(0.4)
            .reaction_const(0.1)
            .birth(Arc::new(|_x, a, _tau, tt| {
                // fertile ages peak mid-life; newborn sizes concentrated low
                4.0 * a * (-3.0 * a).exp() * (1.0 + (std::f64::consts::PI * tt).cos())
            }))
            .build()),
        "pure-diffusion" => Ok(CoefficientBuilder::new("pure-diffusion")
            .diffusion_const(0.2)
            .reaction_const(0.3)
            .growth_const(0.4)
            .build()),
        "pure-transport" => Ok(CoefficientBuilder::new("pure-transport")
            .diffusion(Arc::new(|_x| [[0.0, 0.0], [0.0, 0.0]]))
            .sigma1(0.0)
            .growth_const(0.4)
            .reaction_const(0.0)
            .build()),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// A scalar function of one variable tabulated from a CSV file with columns
/// `coordinate,value`, evaluated by linear interpolation (clamped outside
/// the table).
#[derive(Debug, Clone)]
pub struct TabulatedScalar {
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl TabulatedScalar {
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .from_path(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Config(format!("csv parse error: {e}")))?;
            if rec.len() < 2 {
                return Err(Error::Config("csv row needs coordinate and value".into()));
            }
            // skip a header row if present
            let x: f64 = match rec[0].trim().parse() {
                Ok(v) => v,
                Err(_) => continue,
            };
            let v: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad value in csv: {e}")))?;
            rows.push((x, v));
        }
        if rows.len() < 2 {
            return Err(Error::Config("csv table needs at least two rows".into()));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(TabulatedScalar {
            xs: rows.iter().map(|r| r.0).collect(),
            vs: rows.iter().map(|r| r.1).collect(),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.vs[0];
        }
        if x >= self.xs[n - 1] {
            return self.vs[n - 1];
        }
        let j = self.xs.partition_point(|&v| v < x).max(1);
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let t = (x - x0) / (x1 - x0);
        self.vs[j - 1] * (1.0 - t) + self.vs[j] * t
    }
}

/// Preset with the reaction coefficient replaced by a CSV table `c(x)`
/// (1-D coordinate column).
pub fn preset_with_csv_reaction(base: &str, path: &Path) -> Result<CoefficientSet> {
    let mut set = preset(base)?;
    let table = Arc::new(TabulatedScalar::from_csv(path)?);
    set.name = format!("{base}+csv-reaction");
    set.reaction = Arc::new(move |x, _t, _a, _tau| table.eval(x[0]));
    Ok(set)
}
