//! Forward solver for the structured population system: first-order
//! operator splitting with conservative upwind transport in (a, tau),
//! Crank–Nicolson diffusion-reaction in x, and a lagged birth refresh.

use std::sync::Arc;

use crate::domain::{CoefficientSet, Field, Grid};
use crate::error::{Error, Result};
use crate::exec;
use crate::sparse::thomas_solve;

/// Which terms of the system the stepper applies. All on for the full
/// model; the pure-diffusion and pure-transport studies switch parts off.
#[derive(Debug, Clone, Copy)]
pub struct TermMask {
    pub advect_age: bool,
    pub advect_size: bool,
    pub diffusion: bool,
    pub birth: bool,
}

impl Default for TermMask {
    fn default() -> Self {
        TermMask {
            advect_age: true,
            advect_size: true,
            diffusion: true,
            birth: true,
        }
    }
}

pub type InitialFn = Arc<dyn Fn(&[f64], f64, f64) -> f64 + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(&[f64], f64, f64, f64) -> f64 + Send + Sync>;

pub struct ForwardProblem {
    pub grid: Arc<Grid>,
    pub coeffs: CoefficientSet,
    /// Initial data `p(x, a, tau)`.
    pub initial: InitialFn,
    /// Optional source `f(x, t, a, tau)`; zero for the homogeneous system.
    pub source: Option<SourceFn>,
    pub mask: TermMask,
}

/// Time-marched solution with per-step diagnostics.
#[derive(Debug)]
pub struct Trajectory {
    pub field: Field,
    pub total_population: Vec<f64>,
    pub max_norm: Vec<f64>,
    /// Max mismatch of `p` against the birth condition at `a = 0`, reported
    /// but not enforced.
    pub initial_mismatch: f64,
}

struct SliceDims {
    nx: usize,
    na: usize,
    ntau: usize,
}

impl SliceDims {
    fn len(&self) -> usize {
        self.nx * self.na * self.ntau
    }
    fn at(&self, ix: usize, ia: usize, itau: usize) -> usize {
        (ix * self.na + ia) * self.ntau + itau
    }
}

/// Transport substep count the stepper uses for this grid (full model).
pub fn transport_substeps(grid: &Grid, coeffs: &CoefficientSet) -> usize {
    let dt = grid.spacing[grid.t_axis()];
    let (ha, htau) = (grid.spacing[grid.a_axis()], grid.spacing[grid.tau_axis()]);
    let sum_rate = 1.0 / ha + max_growth(coeffs, grid) / htau;
    (dt * sum_rate).ceil().max(1.0) as usize
}

fn max_growth(coeffs: &CoefficientSet, grid: &Grid) -> f64 {
    let ax = grid.tau_axis();
    (0..grid.shape[ax])
        .map(|i| (coeffs.growth)(grid.coord(ax, i)))
        .fold(0.0f64, f64::max)
}

/// Slice trapezoid integral over (x, a, tau).
fn slice_population(grid: &Grid, dims: &SliceDims, slice: &[f64]) -> f64 {
    let (hx, ha, htau) = (grid.spacing[0], grid.spacing[grid.a_axis()], grid.spacing[grid.tau_axis()]);
    let mut acc = 0.0;
    for ix in 0..dims.nx {
        let wx = hx * if ix == 0 || ix == dims.nx - 1 { 0.5 } else { 1.0 };
        for ia in 0..dims.na {
            let wa = ha * if ia == 0 || ia == dims.na - 1 { 0.5 } else { 1.0 };
            for it in 0..dims.ntau {
                let wt = htau * if it == 0 || it == dims.ntau - 1 { 0.5 } else { 1.0 };
                acc += wx * wa * wt * slice[dims.at(ix, ia, it)];
            }
        }
    }
    acc
}

/// Birth boundary values for one time level: for each `(x, tau)` the double
/// quadrature of `beta(x, a, tau, tau~) u(x, a, tau~)`.
fn birth_values(
    grid: &Grid,
    dims: &SliceDims,
    coeffs: &CoefficientSet,
    slice: &[f64],
) -> Vec<f64> {
    let (ha, htau) = (grid.spacing[grid.a_axis()], grid.spacing[grid.tau_axis()]);
    let a_axis = grid.a_axis();
    let tau_axis = grid.tau_axis();
    let mut out = vec![0.0; dims.nx * dims.ntau];
    exec::fill_indexed(&mut out, |oi| {
        let itau = oi % dims.ntau;
        let ix = oi / dims.ntau;
        let x = [grid.coord(0, ix)];
        let tau = grid.coord(tau_axis, itau);
        let mut acc = 0.0;
        for ia in 0..dims.na {
            let wa = ha * if ia == 0 || ia == dims.na - 1 { 0.5 } else { 1.0 };
            let a = grid.coord(a_axis, ia);
            for jt in 0..dims.ntau {
                let wt = htau * if jt == 0 || jt == dims.ntau - 1 { 0.5 } else { 1.0 };
                let tt = grid.coord(tau_axis, jt);
                acc += wa * wt * (coeffs.birth_rate)(&x, a, tau, tt) * slice[dims.at(ix, ia, jt)];
            }
        }
        acc
    });
    out
}

/// March the split scheme over the grid's time axis.
pub fn solve_forward(problem: &ForwardProblem) -> Result<Trajectory> {
    let grid = problem.grid.clone();
    if grid.spatial_dim() != 1 {
        return Err(Error::Unsupported(
            "the forward stepper covers 1-D spatial habitats; 2-D forward runs are out of scope"
                .into(),
        ));
    }
    let coeffs = &problem.coeffs;
    coeffs.validate_on_grid(&grid)?;
    let mask = problem.mask;

    let dims = SliceDims {
        nx: grid.shape[0],
        na: grid.shape[grid.a_axis()],
        ntau: grid.shape[grid.tau_axis()],
    };
    let nt = grid.shape[grid.t_axis()];
    let dt = grid.spacing[grid.t_axis()];
    let (ha, htau) = (grid.spacing[grid.a_axis()], grid.spacing[grid.tau_axis()]);
    let g_max = max_growth(coeffs, &grid);

    // advertised CFL condition; refined internally by substepping
    let mut cfl = 0.0f64;
    if mask.advect_age {
        cfl = cfl.max(dt / ha);
    }
    if mask.advect_size {
        cfl = cfl.max(dt * g_max / htau);
    }
    if cfl > 1.0 + 1e-12 {
        return Err(Error::Cfl(format!(
            "CFL number {cfl:.4} exceeds 1: h_t max(1/h_a, g_max/h_tau) must not exceed 1"
        )));
    }
    // monotonicity of the combined explicit update needs the sum condition
    let sum_rate = (if mask.advect_age { 1.0 / ha } else { 0.0 })
        + (if mask.advect_size { g_max / htau } else { 0.0 });
    let substeps = (dt * sum_rate).ceil().max(1.0) as usize;
    let dt_sub = dt / substeps as f64;

    // initial slice
    let mut cur = vec![0.0; dims.len()];
    {
        let g = &grid;
        let d = &dims;
        exec::fill_indexed(&mut cur, |i| {
            let itau = i % d.ntau;
            let ia = (i / d.ntau) % d.na;
            let ix = i / (d.ntau * d.na);
            (problem.initial)(
                &[g.coord(0, ix)],
                g.coord(g.a_axis(), ia),
                g.coord(g.tau_axis(), itau),
            )
        });
    }
    if cur.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial data is not finite".into()));
    }
    if mask.advect_size {
        let worst = (0..dims.nx)
            .flat_map(|ix| (0..dims.na).map(move |ia| (ix, ia)))
            .map(|(ix, ia)| cur[dims.at(ix, ia, 0)].abs())
            .fold(0.0f64, f64::max);
        if worst > 1e-12 {
            return Err(Error::Config(format!(
                "initial data violates the inflow condition at tau = tau_1 (max |p| = {worst:.3e})"
            )));
        }
    }

    // initial birth mismatch (diagnostic only)
    let initial_mismatch = if mask.birth {
        let b = birth_values(&grid, &dims, coeffs, &cur);
        (0..dims.nx * dims.ntau)
            .map(|oi| {
                let itau = oi % dims.ntau;
                let ix = oi / dims.ntau;
                (cur[dims.at(ix, 0, itau)] - b[oi]).abs()
            })
            .fold(0.0f64, f64::max)
    } else {
        0.0
    };

    let mut field = Field::zeros(grid.clone());
    let mut total_population = Vec::with_capacity(nt);
    let mut max_norm = Vec::with_capacity(nt);

    let write_slice = |field: &mut Field, it: usize, slice: &[f64]| {
        let st = grid.strides()[grid.t_axis()];
        let sx = grid.strides()[0];
        let sa = grid.strides()[grid.a_axis()];
        for ix in 0..dims.nx {
            for ia in 0..dims.na {
                for itau in 0..dims.ntau {
                    field.data[ix * sx + it * st + ia * sa + itau] =
                        slice[dims.at(ix, ia, itau)];
                }
            }
        }
    };

    write_slice(&mut field, 0, &cur);
    total_population.push(slice_population(&grid, &dims, &cur));
    max_norm.push(cur.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    let mut next = vec![0.0; dims.len()];
    for it in 1..nt {
        let t_old = grid.coord(grid.t_axis(), it - 1);
        let t_mid = t_old + 0.5 * dt;
        let birth = if mask.birth {
            Some(birth_values(&grid, &dims, coeffs, &cur))
        } else {
            None
        };

        // (i) explicit conservative upwind transport, substepped
        for _ in 0..substeps {
            {
                let c = &cur;
                let d = &dims;
                let g = &grid;
                exec::fill_indexed(&mut next, |i| {
                    let itau = i % d.ntau;
                    let ia = (i / d.ntau) % d.na;
                    let mut v = c[i];
                    if mask.advect_age {
                        if ia == 0 {
                            // refreshed by the birth condition below
                        } else {
                            v -= dt_sub / ha * (c[i] - c[i - d.ntau]);
                        }
                    }
                    if mask.advect_size && itau > 0 {
                        let tau_axis = g.tau_axis();
                        let tau_m = g.coord(tau_axis, itau) - 0.5 * htau;
                        let flux_in = (coeffs.growth)(tau_m) * c[i - 1];
                        let tau_p = g.coord(tau_axis, itau) + 0.5 * htau;
                        let flux_out = (coeffs.growth)(tau_p) * c[i];
                        v -= dt_sub / htau * (flux_out - flux_in);
                    }
                    v
                });
            }
            std::mem::swap(&mut cur, &mut next);
            // inflow condition at tau = tau_1
            if mask.advect_size {
                for ix in 0..dims.nx {
                    for ia in 0..dims.na {
                        cur[dims.at(ix, ia, 0)] = 0.0;
                    }
                }
            }
        }

        // (ii) Crank–Nicolson diffusion-reaction in x (with the source at
        // the half step), line solves over x per (a, tau)
        if mask.diffusion || problem.source.is_some() {
            let hx = grid.spacing[0];
            let lines = dims.na * dims.ntau;
            let solved: Vec<(usize, Vec<f64>)> = exec::chunk_map_collect(lines, |lo, hi| {
                let mut block = Vec::with_capacity((hi - lo) * dims.nx);
                let mut lower = vec![0.0; dims.nx];
                let mut diag = vec![0.0; dims.nx];
                let mut upper = vec![0.0; dims.nx];
                let mut rhs = vec![0.0; dims.nx];
                let mut scratch = Vec::new();
                for line in lo..hi {
                    let itau = line % dims.ntau;
                    let ia = line / dims.ntau;
                    let a = grid.coord(grid.a_axis(), ia);
                    let tau = grid.coord(grid.tau_axis(), itau);
                    for ix in 0..dims.nx {
                        let x = [grid.coord(0, ix)];
                        let adiff = if mask.diffusion {
                            (coeffs.diffusion)(&x)[0][0]
                        } else {
                            0.0
                        };
                        let b = if mask.diffusion {
                            (coeffs.drift)(&x, t_mid, a, tau)[0]
                        } else {
                            0.0
                        };
                        let cc = if mask.diffusion {
                            (coeffs.reaction)(&x, t_mid, a, tau)
                        } else {
                            0.0
                        };
                        let r = 0.5 * dt * adiff / (hx * hx);
                        let q = 0.25 * dt * b / hx;
                        let uc = cur[dims.at(ix, ia, itau)];
                        // K u = a u'' - b u' - c u; Neumann reflection at faces
                        let (lo_c, hi_c, di_c);
                        if ix == 0 {
                            lo_c = 0.0;
                            hi_c = 2.0 * r;
                            di_c = -2.0 * r - 0.5 * dt * cc;
                        } else if ix == dims.nx - 1 {
                            lo_c = 2.0 * r;
                            hi_c = 0.0;
                            di_c = -2.0 * r - 0.5 * dt * cc;
                        } else {
                            lo_c = r + q;
                            hi_c = r - q;
                            di_c = -2.0 * r - 0.5 * dt * cc;
                        }
                        lower[ix] = -lo_c;
                        diag[ix] = 1.0 - di_c;
                        upper[ix] = -hi_c;
                        let u_lo = if ix > 0 {
                            cur[dims.at(ix - 1, ia, itau)]
                        } else {
                            cur[dims.at(1, ia, itau)]
                        };
                        let u_hi = if ix + 1 < dims.nx {
                            cur[dims.at(ix + 1, ia, itau)]
                        } else {
                            cur[dims.at(dims.nx - 2, ia, itau)]
                        };
                        let mut explicit = if ix == 0 || ix == dims.nx - 1 {
                            let nb = if ix == 0 { u_hi } else { u_lo };
                            2.0 * r * (nb - uc) - 0.5 * dt * cc * uc
                        } else {
                            r * (u_hi - 2.0 * uc + u_lo) - q * (u_hi - u_lo)
                                - 0.5 * dt * cc * uc
                        };
                        if let Some(src) = &problem.source {
                            explicit += dt * src(&x, t_mid, a, tau);
                        }
                        rhs[ix] = uc + explicit;
                    }
                    thomas_solve(&lower, &diag, &upper, &mut rhs, &mut scratch)
                        .expect("tridiagonal CN solve");
                    block.extend_from_slice(&rhs);
                }
                (lo, block)
            });
            for (lo, block) in solved {
                for (off, chunk) in block.chunks(dims.nx).enumerate() {
                    let line = lo + off;
                    let itau = line % dims.ntau;
                    let ia = line / dims.ntau;
                    for ix in 0..dims.nx {
                        cur[dims.at(ix, ia, itau)] = chunk[ix];
                    }
                }
            }
        }

        // (iii) birth refresh at a = 0 (lagged) and inflow at tau = tau_1
        if mask.advect_age {
            match &birth {
                Some(b) => {
                    for ix in 0..dims.nx {
                        for itau in 0..dims.ntau {
                            cur[dims.at(ix, 0, itau)] = b[ix * dims.ntau + itau];
                        }
                    }
                }
                None => {
                    for ix in 0..dims.nx {
                        for itau in 0..dims.ntau {
                            cur[dims.at(ix, 0, itau)] = 0.0;
                        }
                    }
                }
            }
        }
        if mask.advect_size {
            for ix in 0..dims.nx {
                for ia in 0..dims.na {
                    cur[dims.at(ix, ia, 0)] = 0.0;
                }
            }
        }

        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverDiverged(format!(
                "non-finite state at time step {it}"
            )));
        }
        write_slice(&mut field, it, &cur);
        total_population.push(slice_population(&grid, &dims, &cur));
        max_norm.push(cur.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    Ok(Trajectory {
        field,
        total_population,
        max_norm,
        initial_mismatch,
    })
}

/// Manufactured-solution forcing: the masked transport terms minus the
/// masked elliptic terms applied to a sampled exact solution, via the
/// shared discrete operators.
pub fn mms_source(u_star: &Field, coeffs: &CoefficientSet, mask: TermMask) -> Result<Field> {
    use crate::domain::ops::{apply_k, diff};
    let g = u_star.grid.clone();
    let ut = diff(u_star, g.t_axis());
    let ua = diff(u_star, g.a_axis());
    let utau = diff(u_star, g.tau_axis());
    let ku = apply_k(u_star, coeffs)?;
    let tau_axis = g.tau_axis();
    let mut out = Field::zeros(g.clone());
    let data = &u_star.data;
    exec::fill_indexed(&mut out.data, |i| {
        let tau = g.coord(tau_axis, g.axis_index(i, tau_axis));
        let mut v = ut.data[i];
        if mask.advect_age {
            v += ua.data[i];
        }
        if mask.advect_size {
            v += (coeffs.growth)(tau) * utau.data[i] + (coeffs.growth_prime)(tau) * data[i];
        }
        if mask.diffusion {
            v -= ku.data[i];
        }
        v
    });
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    pub monotone: bool,
}

/// Refinement study against an exact solution: solve at doubling
/// resolutions and report L2 errors with fitted orders between levels.
pub fn convergence_study<P, E>(
    levels: usize,
    base_n: usize,
    problem_for: P,
    exact: E,
) -> Result<StudyResult>
where
    P: Fn(usize) -> Result<ForwardProblem>,
    E: Fn(&[f64], f64, f64, f64) -> f64 + Sync,
{
    if levels < 3 {
        return Err(Error::Config(format!("need at least 3 levels, got {levels}")));
    }
    let mut resolutions = Vec::new();
    let mut errors = Vec::new();
    for level in 0..levels {
        let n = (base_n - 1) * (1 << level) + 1;
        let problem = problem_for(n)?;
        let traj = solve_forward(&problem)?;
        let g = traj.field.grid.clone();
        let exact_f = Field::from_fn(g, |x, t, a, tau| exact(x, t, a, tau));
        let mut diff = traj.field;
        diff.axpy(-1.0, &exact_f);
        resolutions.push(n);
        errors.push(diff.l2_norm());
    }
    let orders: Vec<f64> = errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    Ok(StudyResult {
        resolutions,
        errors,
        orders,
        monotone,
    })
}
