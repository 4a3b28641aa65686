//! Compactly supported polynomial bump test functions.

use std::sync::Arc;

use rand::Rng;

use crate::domain::{Field, Grid};

/// Tensor-product bump: along each axis the profile is `(1 - r^2)^4` for
/// `r = (coord - center) / radius`, zero outside. C^3 across the support
/// boundary, which is enough regularity for the second-order stencils.
#[derive(Debug, Clone)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

impl Bump {
    pub fn value(&self, coords: &[f64]) -> f64 {
        let mut v = 1.0;
        for k in 0..coords.len() {
            let r = (coords[k] - self.center[k]) / self.radius[k];
            let q = 1.0 - r * r;
            if q <= 0.0 {
                return 0.0;
            }
            v *= q * q * q * q;
        }
        v
    }

    pub fn to_field(&self, grid: Arc<Grid>) -> Field {
        let naxes = grid.naxes();
        let b = self.clone();
        let g = grid.clone();
        let mut f = Field::zeros(grid);
        crate::exec::fill_indexed(&mut f.data, |flat| {
            let mut c = [0.0; 5];
            g.coords(flat, &mut c[..naxes]);
            b.value(&c[..naxes])
        });
        f
    }

    /// Draw a bump whose support stays at least `margin_cells` grid cells
    /// away from every face.
    pub fn random<R: Rng>(grid: &Grid, margin_cells: usize, rng: &mut R) -> Bump {
        let naxes = grid.naxes();
        let mut center = vec![0.0; naxes];
        let mut radius = vec![0.0; naxes];
        for k in 0..naxes {
            let lo = grid.origin[k];
            let extent = grid.extent(k);
            let margin = margin_cells as f64 * grid.spacing[k];
            // largest admissible radius with the center mid-range
            let r_max = 0.45 * (extent - 2.0 * margin);
            let r_min = 0.5 * r_max;
            let r = r_min + (r_max - r_min) * rng.random::<f64>();
            let c_lo = lo + margin + r;
            let c_hi = lo + extent - margin - r;
            center[k] = c_lo + (c_hi - c_lo) * rng.random::<f64>();
            radius[k] = r;
        }
        Bump { center, radius }
    }
}
