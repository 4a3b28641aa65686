//! Unique-continuation geometry: the weight-base catalog, the level values
//! `mu_1..mu_4`, the region `D`, inclusion checks and the cut-off function.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::carleman::{CarlemanWeight, WeightFn};
use crate::domain::{build_grid, DomainSpec, Field, SpatialDomain};
use crate::error::{Error, Result};

/// A weight base `d` valid on an extension domain `Omega_1`, vanishing on
/// its boundary, with a known exceptional set `omega` where the gradient
/// may vanish and the sup norm over the closure.
#[derive(Clone)]
pub struct WeightBase {
    pub name: String,
    pub d: WeightFn,
    pub omega1: SpatialDomain,
    pub omega: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    pub norm: f64,
}

impl std::fmt::Debug for WeightBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightBase")
            .field("name", &self.name)
            .field("norm", &self.norm)
            .finish()
    }
}

fn grad_norm(w: &WeightFn, x: &[f64]) -> f64 {
    let g = (w.grad)(x);
    g[..x.len()].iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl WeightBase {
    /// Sample-check the defining properties: `d > 0` inside `Omega_1`,
    /// `d = 0` on its boundary, `|grad d| > 0` off `omega`.
    pub fn validate(&self, samples_per_axis: usize) -> Result<()> {
        let dim = self.omega1.dim();
        let bounds = self.omega1.bounds();
        let n = samples_per_axis.max(3);
        let total = n.pow(dim as u32);
        let mut x = vec![0.0; dim];
        // shortest box edge sets the interior margin
        let min_edge = bounds
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(f64::INFINITY, f64::min);
        let margin = 0.02 * min_edge;
        for flat in 0..total {
            let mut rem = flat;
            for k in 0..dim {
                let i = rem % n;
                rem /= n;
                let (lo, hi) = bounds[k];
                x[k] = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            }
            if !self.omega1.contains(&x) {
                continue;
            }
            let interior = match &self.omega1 {
                SpatialDomain::Ball { dim, radius } => {
                    x[..*dim].iter().map(|v| v * v).sum::<f64>().sqrt() < radius - margin
                }
                _ => bounds
                    .iter()
                    .zip(&x)
                    .all(|(&(lo, hi), &xi)| xi > lo + margin && xi < hi - margin),
            };
            let dv = (self.d.eval)(&x);
            if interior && !(dv > 0.0) {
                return Err(Error::Geometry(format!(
                    "{}: d = {dv} not positive at interior point {x:?}",
                    self.name
                )));
            }
            if interior && !(self.omega)(&x) && !(grad_norm(&self.d, &x) > 0.0) {
                return Err(Error::Geometry(format!(
                    "{}: gradient of d vanishes off omega at {x:?}",
                    self.name
                )));
            }
        }
        // boundary samples
        for bp in boundary_samples(&self.omega1, 64) {
            let dv = (self.d.eval)(&bp);
            if dv.abs() > 1e-9 {
                return Err(Error::Geometry(format!(
                    "{}: d = {dv} does not vanish at boundary point {bp:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn boundary_samples(dom: &SpatialDomain, count: usize) -> Vec<Vec<f64>> {
    match dom {
        SpatialDomain::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
        SpatialDomain::Rect { lo, hi } => {
            let mut out = Vec::new();
            for i in 0..count {
                let t = i as f64 / (count - 1) as f64;
                out.push(vec![lo[0] + t * (hi[0] - lo[0]), lo[1]]);
                out.push(vec![lo[0] + t * (hi[0] - lo[0]), hi[1]]);
                out.push(vec![lo[0], lo[1] + t * (hi[1] - lo[1])]);
                out.push(vec![hi[0], lo[1] + t * (hi[1] - lo[1])]);
            }
            out
        }
        SpatialDomain::Ball { dim, radius } => {
            if *dim == 1 {
                vec![vec![-radius], vec![*radius]]
            } else {
                (0..count)
                    .map(|i| {
                        let th = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                        vec![radius * th.cos(), radius * th.sin()]
                    })
                    .collect()
            }
        }
    }
}

pub const GEOMETRY_KINDS: &[&str] = &["unit-ball", "unit-interval", "interval-gamma"];

/// Catalog of weight bases with analytic derivatives.
pub fn weight_catalog(geometry_kind: &str) -> Result<WeightBase> {
    match geometry_kind {
        // d = 1 - |x|^2 on the unit ball; gradient vanishes at the origin
        "unit-ball" => Ok(WeightBase {
            name: "unit-ball".into(),
            d: WeightFn {
                name: "one-minus-r2".into(),
                eval: Arc::new(|x| 1.0 - x.iter().map(|v| v * v).sum::<f64>()),
                grad: Arc::new(|x| {
                    let mut g = [0.0; 2];
                    for k in 0..x.len() {
                        g[k] = -2.0 * x[k];
                    }
                    g
                }),
                hess: Arc::new(|x| {
                    let mut h = [[0.0; 2]; 2];
                    for (k, row) in h.iter_mut().enumerate().take(x.len()) {
                        row[k] = -2.0;
                    }
                    h
                }),
            },
            omega1: SpatialDomain::Ball { dim: 2, radius: 1.0 },
            omega: Arc::new(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.1),
            norm: 1.0,
        }),
        // d = sin(pi x) on (0,1); the critical point 1/2 sits inside omega
        "unit-interval" => Ok(WeightBase {
            name: "unit-interval".into(),
            d: WeightFn {
                name: "sin-pi-x".into(),
                eval: Arc::new(|x| (std::f64::consts::PI * x[0]).sin()),
                grad: Arc::new(|x| {
                    [
                        std::f64::consts::PI * (std::f64::consts::PI * x[0]).cos(),
                        0.0,
                    ]
                }),
                hess: Arc::new(|x| {
                    let pi = std::f64::consts::PI;
                    [[-pi * pi * (pi * x[0]).sin(), 0.0], [0.0, 0.0]]
                }),
            },
            omega1: SpatialDomain::Interval { lo: 0.0, hi: 1.0 },
            omega: Arc::new(|x| x[0] > 0.4 && x[0] < 0.6),
            norm: 1.0,
        }),
        // Omega = (0,1) observed through Gamma = {1}: Omega_1 extends to
        // (0, 1.3) and the critical point of d lands in omega = (1.05, 1.25),
        // outside the closure of Omega. With y = x/1.3 and
        // y* = (1/28)^{1/27}, d = (y - y^28) / (y* - y*^28) peaks at
        // x = 1.3 y* ~ 1.149 with value 1.
        "interval-gamma" => {
            let y_star = (1.0f64 / 28.0).powf(1.0 / 27.0);
            let c = y_star - y_star.powi(28);
            Ok(WeightBase {
                name: "interval-gamma".into(),
                d: WeightFn {
                    name: "poly-ext".into(),
                    eval: Arc::new(move |x| {
                        let y = x[0] / 1.3;
                        (y - y.powi(28)) / c
                    }),
                    grad: Arc::new(move |x| {
                        let y = x[0] / 1.3;
                        [(1.0 - 28.0 * y.powi(27)) / (c * 1.3), 0.0]
                    }),
                    hess: Arc::new(move |x| {
                        let y = x[0] / 1.3;
                        [[-28.0 * 27.0 * y.powi(26) / (c * 1.3 * 1.3), 0.0], [0.0, 0.0]]
                    }),
                },
                omega1: SpatialDomain::Interval { lo: 0.0, hi: 1.3 },
                omega: Arc::new(|x| x[0] > 1.05 && x[0] < 1.25),
                norm: 1.0,
            })
        }
        other => Err(Error::UnknownPreset(format!("geometry {other}"))),
    }
}

/// The observed subboundary, as a proximity predicate on spatial points.
#[derive(Clone)]
pub struct Gamma {
    pub name: String,
    pub near: Arc<dyn Fn(&[f64], f64) -> bool + Send + Sync>,
}

impl std::fmt::Debug for Gamma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Gamma({})", self.name)
    }
}

impl Gamma {
    /// Right endpoint of a 1-D interval domain.
    pub fn interval_right(hi: f64) -> Gamma {
        Gamma {
            name: "right-endpoint".into(),
            near: Arc::new(move |x, tol| (x[0] - hi).abs() <= tol),
        }
    }

    /// The whole boundary of a ball.
    pub fn ball_full(radius: f64) -> Gamma {
        Gamma {
            name: "full-sphere".into(),
            near: Arc::new(move |x, tol| {
                (x.iter().map(|v| v * v).sum::<f64>().sqrt() - radius).abs() <= tol
            }),
        }
    }

    /// Both endpoints of a 1-D interval.
    pub fn interval_both(lo: f64, hi: f64) -> Gamma {
        Gamma {
            name: "both-endpoints".into(),
            near: Arc::new(move |x, tol| (x[0] - lo).abs() <= tol || (x[0] - hi).abs() <= tol),
        }
    }
}

/// The level values `mu_k = exp(lambda (k ||d|| / N - beta eps^2 / N))`,
/// `k = 1..4`. Pure formula; no admissibility checks.
pub fn mu_levels(norm_d: f64, beta_eps2: f64, lambda: f64, n: usize) -> [f64; 4] {
    let nf = n as f64;
    let mut mu = [0.0; 4];
    for (k, m) in mu.iter_mut().enumerate() {
        *m = (lambda * ((k + 1) as f64 * norm_d / nf - beta_eps2 / nf)).exp();
    }
    mu
}

/// The assembled unique-continuation geometry.
#[derive(Debug, Clone)]
pub struct UCGeometry {
    pub base: WeightBase,
    pub spec: DomainSpec,
    pub omega0: SpatialDomain,
    pub gamma: Gamma,
    pub epsilon: f64,
    pub n_param: usize,
    pub beta_w: f64,
    pub lambda: f64,
    /// `p = (t0, a0, tau0)`
    pub center: [f64; 3],
    pub mu: [f64; 4],
}

/// Smallest admissible `N`: least integer above `4 ||d|| / min_{Omega_0} d`
/// (and above 1), then doubled for margin.
pub fn suggest_n(base: &WeightBase, omega0: &SpatialDomain, samples_per_axis: usize) -> Result<usize> {
    let min_d = min_d_on(base, omega0, samples_per_axis)?;
    let n0 = ((4.0 * base.norm / min_d).floor() as usize + 1).max(2);
    Ok(2 * n0)
}

fn min_d_on(base: &WeightBase, omega0: &SpatialDomain, samples_per_axis: usize) -> Result<f64> {
    let dim = omega0.dim();
    let bounds = omega0.bounds();
    let n = samples_per_axis.max(3);
    let mut min = f64::INFINITY;
    let mut x = vec![0.0; dim];
    for flat in 0..n.pow(dim as u32) {
        let mut rem = flat;
        for k in 0..dim {
            let i = rem % n;
            rem /= n;
            let (lo, hi) = bounds[k];
            x[k] = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        }
        if !omega0.contains(&x) {
            continue;
        }
        min = min.min((base.d.eval)(&x));
    }
    if !min.is_finite() {
        return Err(Error::Geometry("no sample points landed in Omega_0".into()));
    }
    Ok(min)
}

/// Build the geometry: fix `beta_w` at the admissible-interval midpoint,
/// check the largeness condition on `Omega_0`, the center margins, and
/// compute the levels.
#[allow(clippy::too_many_arguments)]
pub fn build_uc_geometry(
    base: WeightBase,
    spec: &DomainSpec,
    omega0: SpatialDomain,
    gamma: Gamma,
    epsilon: f64,
    n: usize,
    lambda: f64,
    center: [f64; 3],
) -> Result<UCGeometry> {
    if n <= 1 {
        return Err(Error::Geometry(format!("N must exceed 1, got {n}")));
    }
    if !(epsilon > 0.0) || !(lambda > 0.0) {
        return Err(Error::Geometry(format!(
            "epsilon and lambda must be positive: {epsilon}, {lambda}"
        )));
    }
    spec.validate()?;
    let m = std::f64::consts::SQRT_2 * epsilon;
    let phase_bounds = [
        (0.0, spec.t_max),
        (0.0, spec.a_max),
        (spec.tau_min, spec.tau_max),
    ];
    for (k, &(lo, hi)) in phase_bounds.iter().enumerate() {
        if center[k] < lo + m || center[k] > hi - m {
            return Err(Error::Geometry(format!(
                "center component {k} = {} violates the sqrt(2)*eps margin of [{lo}, {hi}]",
                center[k]
            )));
        }
    }
    // largeness of d on Omega_0
    let min_d = min_d_on(&base, &omega0, 64)?;
    if !(min_d > 4.0 * base.norm / n as f64) {
        return Err(Error::Geometry(format!(
            "N too small for Omega_0: min d = {min_d} <= 4||d||/N = {}",
            4.0 * base.norm / n as f64
        )));
    }
    // admissible-interval midpoint for beta_w
    let beta_w = 0.75 * base.norm / (epsilon * epsilon);
    let be2 = beta_w * epsilon * epsilon;
    assert!(2.0 * be2 > base.norm && base.norm > be2);
    let mu = mu_levels(base.norm, be2, lambda, n);
    assert!(mu[0] < mu[1] && mu[1] < mu[2] && mu[2] < mu[3]);
    Ok(UCGeometry {
        base,
        spec: spec.clone(),
        omega0,
        gamma,
        epsilon,
        n_param: n,
        beta_w,
        lambda,
        center,
        mu,
    })
}

impl UCGeometry {
    pub fn psi(&self, x: &[f64], t: f64, a: f64, tau: f64) -> f64 {
        let off = (t - self.center[0]).powi(2)
            + (a - self.center[1]).powi(2)
            + (tau - self.center[2]).powi(2);
        (self.base.d.eval)(x) - self.beta_w * off
    }

    pub fn phi(&self, x: &[f64], t: f64, a: f64, tau: f64) -> f64 {
        (self.lambda * self.psi(x, t, a, tau)).exp()
    }

    /// Membership in `D = { x in closure(Omega), phi > mu_1 }`.
    pub fn in_d(&self, x: &[f64], t: f64, a: f64, tau: f64) -> bool {
        self.spec.spatial.contains(x) && self.phi(x, t, a, tau) > self.mu[0]
    }

    /// Membership in the inner cylinder `Omega_0 x B(p, eps/sqrt(N))`.
    pub fn in_inner(&self, x: &[f64], t: f64, a: f64, tau: f64) -> bool {
        let off = (t - self.center[0]).powi(2)
            + (a - self.center[1]).powi(2)
            + (tau - self.center[2]).powi(2);
        self.omega0.contains(x) && off < self.epsilon * self.epsilon / self.n_param as f64
    }

    /// Phase-space distance to the center `p`.
    pub fn offset_norm(&self, t: f64, a: f64, tau: f64) -> f64 {
        ((t - self.center[0]).powi(2)
            + (a - self.center[1]).powi(2)
            + (tau - self.center[2]).powi(2))
        .sqrt()
    }

    /// The matching Carleman weight at a given `s`.
    pub fn carleman_weight(&self, s: f64) -> Result<CarlemanWeight> {
        CarlemanWeight::new(self.base.d.clone(), self.beta_w, self.lambda, s, self.center)
    }

    /// The large-`s` decay factor `exp(-2 s (mu_4 - mu_3))`.
    pub fn decay_bound(&self, s: f64) -> f64 {
        (-2.0 * s * (self.mu[3] - self.mu[2])).exp()
    }

    /// `H^{1,0}` norm of a field restricted to `D`: L2 of the value and the
    /// spatial gradient over nodes inside `D`.
    pub fn h10_norm(&self, u: &Field) -> f64 {
        let g = &u.grid;
        let d = g.spatial_dim();
        let naxes = g.naxes();
        let ux: Vec<Field> = (0..d).map(|k| crate::domain::ops::diff(u, k)).collect();
        crate::exec::sum_indexed(g.len(), |i| {
            let mut c = [0.0; 5];
            g.coords(i, &mut c[..naxes]);
            if !self.in_d(&c[..d], c[d], c[d + 1], c[d + 2]) {
                return 0.0;
            }
            let grad2: f64 = ux.iter().map(|f| f.data[i] * f.data[i]).sum();
            g.quad_weight(i) * (u.data[i] * u.data[i] + grad2)
        })
        .sqrt()
    }
}

/// Outcome of the randomized inclusion checks and the grid boundary scan.
#[derive(Debug, Clone)]
pub struct InclusionReport {
    pub inner_checked: usize,
    pub outer_checked: usize,
    pub flip_checked: usize,
    pub counterexamples: Vec<String>,
    pub pass: bool,
}

/// Randomized verification of the inclusion chain
/// `Omega_0 x B(p, eps/sqrt(N)) subset D subset closure(Omega) x B(p, sqrt(2) eps)`
/// plus a grid scan classifying every boundary flip of the `D` predicate.
pub fn verify_inclusions(geo: &UCGeometry, sample_count: usize, seed: u64) -> InclusionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counterexamples = Vec::new();
    let dim = geo.spec.spatial_dim();

    // inner inclusion: points of the inner cylinder must satisfy phi > mu_4
    let ob = geo.omega0.bounds();
    let r_in = geo.epsilon / (geo.n_param as f64).sqrt();
    let mut inner_checked = 0;
    while inner_checked < sample_count {
        let mut x = vec![0.0; dim];
        for k in 0..dim {
            x[k] = ob[k].0 + (ob[k].1 - ob[k].0) * rng.random::<f64>();
        }
        if !geo.omega0.contains(&x) {
            continue;
        }
        // rejection-sample the phase offset ball
        let mut off = [0.0; 3];
        loop {
            for o in &mut off {
                *o = r_in * (2.0 * rng.random::<f64>() - 1.0);
            }
            if off.iter().map(|v| v * v).sum::<f64>() < r_in * r_in {
                break;
            }
        }
        let (t, a, tau) = (
            geo.center[0] + off[0],
            geo.center[1] + off[1],
            geo.center[2] + off[2],
        );
        inner_checked += 1;
        let phi = geo.phi(&x, t, a, tau);
        if !(phi > geo.mu[3]) {
            counterexamples.push(format!(
                "inner point x={x:?} t={t} a={a} tau={tau}: phi={phi} <= mu4={}",
                geo.mu[3]
            ));
        }
    }

    // outer inclusion: points of D stay within sqrt(2) eps of the center
    let sb = geo.spec.spatial.bounds();
    let r_out = std::f64::consts::SQRT_2 * geo.epsilon;
    let mut outer_checked = 0;
    let mut attempts = 0usize;
    while outer_checked < sample_count && attempts < 200 * sample_count.max(1) {
        attempts += 1;
        let mut x = vec![0.0; dim];
        for k in 0..dim {
            x[k] = sb[k].0 + (sb[k].1 - sb[k].0) * rng.random::<f64>();
        }
        let t = geo.spec.t_max * rng.random::<f64>();
        let a = geo.spec.a_max * rng.random::<f64>();
        let tau =
            geo.spec.tau_min + (geo.spec.tau_max - geo.spec.tau_min) * rng.random::<f64>();
        if !geo.in_d(&x, t, a, tau) {
            continue;
        }
        outer_checked += 1;
        let off = geo.offset_norm(t, a, tau);
        if !(off < r_out) {
            counterexamples.push(format!(
                "outer point x={x:?} t={t} a={a} tau={tau}: offset {off} >= sqrt(2) eps = {r_out}"
            ));
        }
    }

    // boundary scan: wherever the D predicate flips between neighbouring
    // grid nodes, the flip must sit within one cell of Gamma or of the
    // level set phi = mu_1
    let res = vec![17usize; dim + 3];
    let mut flip_checked = 0;
    if sample_count > 0 {
        if let Ok(grid) = build_grid(&geo.spec, &res) {
            let naxes = grid.naxes();
            let mut c = [0.0; 5];
            let mut cn = [0.0; 5];
            let mut idx = vec![0usize; naxes];
            for flat in 0..grid.len() {
                grid.coords(flat, &mut c[..naxes]);
                if !geo.in_d(&c[..dim], c[dim], c[dim + 1], c[dim + 2]) {
                    continue;
                }
                let phi_here = geo.phi(&c[..dim], c[dim], c[dim + 1], c[dim + 2]);
                grid.unravel(flat, &mut idx);
                for ax in 0..naxes {
                    for dir in [-1isize, 1] {
                        let j = idx[ax] as isize + dir;
                        let outside_grid = j < 0 || j as usize >= grid.shape[ax];
                        let (nb_in_d, phi_nb) = if outside_grid {
                            (false, phi_here)
                        } else {
                            let nb = (flat as isize
                                + dir * grid.strides()[ax] as isize)
                                as usize;
                            grid.coords(nb, &mut cn[..naxes]);
                            (
                                geo.in_d(&cn[..dim], cn[dim], cn[dim + 1], cn[dim + 2]),
                                geo.phi(&cn[..dim], cn[dim], cn[dim + 1], cn[dim + 2]),
                            )
                        };
                        if nb_in_d {
                            continue;
                        }
                        flip_checked += 1;
                        // classify the flip
                        let cell = grid.spacing[ax];
                        let near_gamma = ax < dim
                            && (geo.gamma.near)(&c[..dim], 1.5 * cell.max(grid.spacing[..dim].iter().fold(0.0f64, |m, v| m.max(*v))));
                        let phi_span = (phi_here - phi_nb).abs().max(1e-12);
                        let near_level = (phi_here - geo.mu[0]).abs() <= 1.1 * phi_span;
                        if !near_gamma && !near_level {
                            counterexamples.push(format!(
                                "boundary flip at x={:?} t={} a={} tau={} (axis {ax}): phi={phi_here}, mu1={}, not near Gamma",
                                &c[..dim], c[dim], c[dim+1], c[dim+2], geo.mu[0]
                            ));
                        }
                    }
                }
            }
        }
    }

    let pass = counterexamples.is_empty();
    InclusionReport {
        inner_checked,
        outer_checked,
        flip_checked,
        counterexamples,
        pass,
    }
}

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` on [0,1].
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

fn smoothstep_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

/// The cut-off `chi = S((phi - mu_2)/(mu_3 - mu_2))`: identically 1 above
/// `mu_3`, identically 0 below `mu_2`, C^2 in between.
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub geo: UCGeometry,
}

impl Cutoff {
    pub fn value_of_phi(&self, phi: f64) -> f64 {
        smoothstep((phi - self.geo.mu[1]) / (self.geo.mu[2] - self.geo.mu[1]))
    }

    pub fn value(&self, x: &[f64], t: f64, a: f64, tau: f64) -> f64 {
        self.value_of_phi(self.geo.phi(x, t, a, tau))
    }

    /// `d chi / d phi`.
    pub fn dchi_dphi(&self, phi: f64) -> f64 {
        let den = self.geo.mu[2] - self.geo.mu[1];
        smoothstep_prime((phi - self.geo.mu[1]) / den) / den
    }

    /// Transport derivative `L0~ chi = (dchi/dphi) lambda phi (L0~ psi)`,
    /// analytic; needs the growth modulus value at `tau`.
    pub fn l0_tilde(&self, g_tau: f64, x: &[f64], t: f64, a: f64, tau: f64) -> f64 {
        let phi = self.geo.phi(x, t, a, tau);
        let lt_psi = -2.0
            * self.geo.beta_w
            * ((t - self.geo.center[0])
                + (a - self.geo.center[1])
                + g_tau * (tau - self.geo.center[2]));
        self.dchi_dphi(phi) * self.geo.lambda * phi * lt_psi
    }

    /// Spatial gradient `grad chi = (dchi/dphi) lambda phi grad d`.
    pub fn grad_x(&self, x: &[f64], t: f64, a: f64, tau: f64) -> [f64; 2] {
        let phi = self.geo.phi(x, t, a, tau);
        let f = self.dchi_dphi(phi) * self.geo.lambda * phi;
        let gd = (self.geo.base.d.grad)(x);
        [f * gd[0], f * gd[1]]
    }
}

/// Sample the cut-off on a grid.
pub fn cutoff_chi(geo: &UCGeometry, grid: std::sync::Arc<crate::domain::Grid>) -> Field {
    let cut = Cutoff { geo: geo.clone() };
    Field::from_fn(grid, |x, t, a, tau| cut.value(x, t, a, tau)).labeled("chi")
}
