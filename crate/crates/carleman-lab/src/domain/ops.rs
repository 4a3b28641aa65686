//! Discrete differential and integral operators on tensor-grid fields.
//!
//! Stencils are centered second-order in the interior with 3-point
//! one-sided closures at the t/a/tau faces. The homogeneous Neumann
//! condition on the spatial boundary is realized by ghost-node reflection
//! inside [`apply_k`], which keeps second-order consistency.

use crate::domain::{CoefficientSet, Field};
use crate::error::{Error, Result};
use crate::exec;

/// First derivative along `axis`: centered interior, 3-point one-sided at
/// the axis faces.
pub fn diff(u: &Field, axis: usize) -> Field {
    let g = u.grid.clone();
    let n = g.shape[axis];
    let s = g.strides()[axis];
    let h = g.spacing[axis];
    let data = &u.data;
    let mut out = vec![0.0; data.len()];
    exec::fill_indexed(&mut out, |flat| {
        let i = g.axis_index(flat, axis);
        if i == 0 {
            (-3.0 * data[flat] + 4.0 * data[flat + s] - data[flat + 2 * s]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * data[flat] - 4.0 * data[flat - s] + data[flat - 2 * s]) / (2.0 * h)
        } else {
            (data[flat + s] - data[flat - s]) / (2.0 * h)
        }
    });
    Field {
        grid: u.grid.clone(),
        data: out,
        label: None,
    }
}

/// Second derivative along `axis`: centered interior, one-sided at faces.
pub fn diff2(u: &Field, axis: usize) -> Field {
    let g = u.grid.clone();
    let n = g.shape[axis];
    let s = g.strides()[axis];
    let h2 = g.spacing[axis] * g.spacing[axis];
    let data = &u.data;
    let mut out = vec![0.0; data.len()];
    exec::fill_indexed(&mut out, |flat| {
        let i = g.axis_index(flat, axis);
        if i == 0 {
            if n >= 4 {
                (2.0 * data[flat] - 5.0 * data[flat + s] + 4.0 * data[flat + 2 * s]
                    - data[flat + 3 * s])
                    / h2
            } else {
                (data[flat] - 2.0 * data[flat + s] + data[flat + 2 * s]) / h2
            }
        } else if i == n - 1 {
            if n >= 4 {
                (2.0 * data[flat] - 5.0 * data[flat - s] + 4.0 * data[flat - 2 * s]
                    - data[flat - 3 * s])
                    / h2
            } else {
                (data[flat] - 2.0 * data[flat - s] + data[flat - 2 * s]) / h2
            }
        } else {
            (data[flat + s] - 2.0 * data[flat] + data[flat - s]) / h2
        }
    });
    Field {
        grid: u.grid.clone(),
        data: out,
        label: None,
    }
}

/// First spatial derivative with Neumann ghost reflection: the mirrored
/// ghost value makes the centered derivative vanish on the boundary.
fn diff_spatial_reflected(u: &Field, axis: usize) -> Field {
    let g = u.grid.clone();
    let n = g.shape[axis];
    let s = g.strides()[axis];
    let h = g.spacing[axis];
    let data = &u.data;
    let mut out = vec![0.0; data.len()];
    exec::fill_indexed(&mut out, |flat| {
        let i = g.axis_index(flat, axis);
        if i == 0 || i == n - 1 {
            0.0
        } else {
            (data[flat + s] - data[flat - s]) / (2.0 * h)
        }
    });
    Field {
        grid: u.grid.clone(),
        data: out,
        label: None,
    }
}

/// Second spatial derivative with Neumann ghost reflection.
fn diff2_spatial_reflected(u: &Field, axis: usize) -> Field {
    let g = u.grid.clone();
    let n = g.shape[axis];
    let s = g.strides()[axis];
    let h2 = g.spacing[axis] * g.spacing[axis];
    let data = &u.data;
    let mut out = vec![0.0; data.len()];
    exec::fill_indexed(&mut out, |flat| {
        let i = g.axis_index(flat, axis);
        if i == 0 {
            2.0 * (data[flat + s] - data[flat]) / h2
        } else if i == n - 1 {
            2.0 * (data[flat - s] - data[flat]) / h2
        } else {
            (data[flat + s] - 2.0 * data[flat] + data[flat - s]) / h2
        }
    });
    Field {
        grid: u.grid.clone(),
        data: out,
        label: None,
    }
}

/// The elliptic operator `Ku = sum a_ij d_i d_j u - sum b_k d_k u - c u`
/// with Neumann reflection at the spatial boundary.
pub fn apply_k(u: &Field, coeffs: &CoefficientSet) -> Result<Field> {
    let g = u.grid.clone();
    let d = g.spatial_dim();
    let naxes = g.naxes();

    let uxx: Vec<Field> = (0..d).map(|k| diff2_spatial_reflected(u, k)).collect();
    let ux: Vec<Field> = (0..d).map(|k| diff_spatial_reflected(u, k)).collect();
    let uxy = if d == 2 {
        Some(diff_spatial_reflected(&ux[0], 1))
    } else {
        None
    };

    let mut out = vec![0.0; u.data.len()];
    let data = &u.data;
    exec::fill_indexed(&mut out, |flat| {
        let mut c = [0.0; 5];
        g.coords(flat, &mut c[..naxes]);
        let (x, t, a, tau) = (&c[..d], c[d], c[d + 1], c[d + 2]);
        let amat = (coeffs.diffusion)(x);
        let b = (coeffs.drift)(x, t, a, tau);
        let cc = (coeffs.reaction)(x, t, a, tau);
        let mut v = amat[0][0] * uxx[0].data[flat] - b[0] * ux[0].data[flat];
        if d == 2 {
            v += amat[1][1] * uxx[1].data[flat]
                + (amat[0][1] + amat[1][0]) * uxy.as_ref().unwrap().data[flat]
                - b[1] * ux[1].data[flat];
        }
        v - cc * data[flat]
    });
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Coefficients(
            "non-finite value while applying the elliptic operator".into(),
        ));
    }
    Ok(Field {
        grid: u.grid.clone(),
        data: out,
        label: None,
    })
}

/// Principal spatial part `sum a_ij d_i d_j u` with plain (non-reflected)
/// stencils; used on compactly supported fields by the conjugation machinery.
pub fn elliptic_principal(u: &Field, coeffs: &CoefficientSet) -> Field {
    let g = u.grid.clone();
    let d = g.spatial_dim();
    let uxx: Vec<Field> = (0..d).map(|k| diff2(u, k)).collect();
    let uxy = if d == 2 { Some(diff(&diff(u, 0), 1)) } else { None };
    let mut out = vec![0.0; u.data.len()];
    exec::fill_indexed(&mut out, |flat| {
        let mut c = [0.0; 5];
        g.coords(flat, &mut c[..g.naxes()]);
        let amat = (coeffs.diffusion)(&c[..d]);
        let mut v = amat[0][0] * uxx[0].data[flat];
        if d == 2 {
            v += amat[1][1] * uxx[1].data[flat]
                + (amat[0][1] + amat[1][0]) * uxy.as_ref().unwrap().data[flat];
        }
        v
    });
    Field {
        grid: u.grid.clone(),
        data: out,
        label: None,
    }
}

/// Transport operator without the growth-derivative term:
/// `d_t u + d_a u + g(tau) d_tau u`.
pub fn apply_l0_tilde(u: &Field, coeffs: &CoefficientSet) -> Field {
    let g = u.grid.clone();
    let ut = diff(u, g.t_axis());
    let ua = diff(u, g.a_axis());
    let utau = diff(u, g.tau_axis());
    let tau_axis = g.tau_axis();
    let mut out = vec![0.0; u.data.len()];
    exec::fill_indexed(&mut out, |flat| {
        let tau = g.coord(tau_axis, g.axis_index(flat, tau_axis));
        ut.data[flat] + ua.data[flat] + (coeffs.growth)(tau) * utau.data[flat]
    });
    Field {
        grid: u.grid.clone(),
        data: out,
        label: None,
    }
}

/// Full transport operator `L0 u = d_t u + d_a u + d_tau(g u)`, expanded
/// with the analytic `g'` so that `L0 - L0_tilde = g' u` holds exactly on
/// the discrete level.
pub fn apply_l0(u: &Field, coeffs: &CoefficientSet) -> Field {
    let g = u.grid.clone();
    let mut out = apply_l0_tilde(u, coeffs);
    let tau_axis = g.tau_axis();
    let data = &u.data;
    let od = &mut out.data;
    exec::for_each_chunk_mut(od, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            let flat = start + k;
            let tau = g.coord(tau_axis, g.axis_index(flat, tau_axis));
            *v += (coeffs.growth_prime)(tau) * data[flat];
        }
    });
    out
}

/// Nonlocal birth boundary values: for each `(x, t, tau)` node the double
/// trapezoid quadrature of `beta(x, a, tau, tau~) u(x, t, a, tau~)` over
/// `(a, tau~)`. Returned flat with `tau` fastest, then `t`, then `x`.
pub fn birth_integral(u: &Field, coeffs: &CoefficientSet) -> Vec<f64> {
    let g = u.grid.clone();
    let d = g.spatial_dim();
    let (ta, aa, tauax) = (g.t_axis(), g.a_axis(), g.tau_axis());
    let (na, ntau) = (g.shape[aa], g.shape[tauax]);
    let (ha, htau) = (g.spacing[aa], g.spacing[tauax]);
    let sa = g.strides()[aa];
    let stau = g.strides()[tauax];

    let x_count: usize = g.shape[..d].iter().product();
    let nt = g.shape[ta];
    let out_len = x_count * nt * ntau;
    let mut out = vec![0.0; out_len];
    let data = &u.data;
    exec::fill_indexed(&mut out, |oi| {
        let itau = oi % ntau;
        let it = (oi / ntau) % nt;
        let xflat = oi / (ntau * nt);
        // reconstruct x coordinates from the x-major flat index
        let mut x = [0.0; 2];
        let mut rem = xflat;
        for k in (0..d).rev() {
            let i = rem % g.shape[k];
            rem /= g.shape[k];
            x[k] = g.coord(k, i);
        }
        let tau = g.coord(tauax, itau);
        // base flat index of (x, t, 0, 0) in the field
        let mut base = it * g.strides()[ta];
        let mut remx = xflat;
        for k in (0..d).rev() {
            let i = remx % g.shape[k];
            remx /= g.shape[k];
            base += i * g.strides()[k];
        }
        let mut acc = 0.0;
        for ia in 0..na {
            let wa = ha * if ia == 0 || ia == na - 1 { 0.5 } else { 1.0 };
            let a = g.coord(aa, ia);
            for jt in 0..ntau {
                let wt = htau * if jt == 0 || jt == ntau - 1 { 0.5 } else { 1.0 };
                let tt = g.coord(tauax, jt);
                let beta = (coeffs.birth_rate)(&x[..d], a, tau, tt);
                acc += wa * wt * beta * data[base + ia * sa + jt * stau];
            }
        }
        acc
    });
    out
}
