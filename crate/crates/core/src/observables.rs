//! LDOS, electron density and line density from Green's function diagonals.

use std::f64::consts::PI;

use crate::dense::C64;
use crate::error::{Error, Result};

/// Ordered energies with quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyGrid {
    energies: Vec<f64>,
    weights: Vec<f64>,
}

impl EnergyGrid {
    /// `n` uniformly spaced points on [e_min, e_max] with trapezoid weights.
    pub fn uniform(e_min: f64, e_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("a uniform energy grid needs at least 2 points, got {n}")));
        }
        if !(e_min.is_finite() && e_max.is_finite() && e_min < e_max) {
            return Err(Error::Config(format!("energy range [{e_min}, {e_max}] is empty")));
        }
        let h = (e_max - e_min) / (n - 1) as f64;
        let energies = (0..n)
            .map(|k| if k + 1 == n { e_max } else { e_min + k as f64 * h })
            .collect();
        let weights = (0..n).map(|k| if k == 0 || k + 1 == n { h / 2.0 } else { h }).collect();
        Ok(EnergyGrid { energies, weights })
    }

    /// Explicit points and weights.
    pub fn custom(energies: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if energies.is_empty() || energies.len() != weights.len() {
            return Err(Error::Config(format!(
                "energy grid needs matching nonempty point and weight lists, got {} and {}",
                energies.len(),
                weights.len()
            )));
        }
        if energies.iter().any(|e| !e.is_finite()) || energies.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("energies must be finite and strictly increasing".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Config("quadrature weights must be positive".into()));
        }
        Ok(EnergyGrid { energies, weights })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

/// LDOS_j = -Im(G^r_jj) / pi.
pub fn ldos(gr_diag: &[C64]) -> Vec<f64> {
    gr_diag.iter().map(|g| -g.im / PI).collect()
}

/// Per-dof values with the (x_index, y_index) of each dof.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    pub values: Vec<f64>,
    pub grid: Vec<(usize, usize)>,
    pub shape: (usize, usize),
    /// Largest |Re G^<_jj| relative to the largest |G^<_jj| at the same energy.
    pub residual: f64,
}

impl DensityMap {
    pub fn new(values: Vec<f64>, grid: Vec<(usize, usize)>, shape: (usize, usize)) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                op: "density map",
                left: (values.len(), 1),
                right: (grid.len(), 1),
            });
        }
        if let Some(&(x, y)) = grid.iter().find(|&&(x, y)| x >= shape.0 || y >= shape.1) {
            return Err(Error::Config(format!("grid index ({x}, {y}) outside shape {shape:?}")));
        }
        Ok(DensityMap {
            values,
            grid,
            shape,
            residual: 0.0,
        })
    }
}

/// Largest tolerated |Re G^<_jj| relative to max_j |G^<_jj| at one energy.
pub const LESSER_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Contribution of one energy point: Im(G^<_jj) with the real-part residual.
pub fn lesser_occupation(gless_diag: &[C64]) -> Result<(Vec<f64>, f64)> {
    let scale = gless_diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst = 0.0;
    for (dof, z) in gless_diag.iter().enumerate() {
        let ratio = if scale > 0.0 { z.re.abs() / scale } else { 0.0 };
        if !ratio.is_finite() || ratio > LESSER_RESIDUAL_TOLERANCE {
            return Err(Error::ResidualTooLarge { dof, ratio });
        }
        worst = f64::max(worst, ratio);
    }
    Ok((gless_diag.iter().map(|z| z.im).collect(), worst))
}

/// n_j = (1/2pi) sum_k w_k Re(-i G^<_jj(E_k)), one diagonal per grid energy.
pub fn electron_density(
    gless: &[Vec<C64>],
    grid: &EnergyGrid,
    dof_grid: Vec<(usize, usize)>,
    shape: (usize, usize),
) -> Result<DensityMap> {
    if gless.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            op: "electron density",
            left: (gless.len(), 1),
            right: (grid.len(), 1),
        });
    }
    let n = dof_grid.len();
    let mut total = vec![0.0; n];
    let mut residual = 0.0;
    for (diag, &w) in gless.iter().zip(grid.weights()) {
        if diag.len() != n {
            return Err(Error::DimensionMismatch {
                op: "electron density",
                left: (diag.len(), 1),
                right: (n, 1),
            });
        }
        let (occ, r) = lesser_occupation(diag)?;
        residual = f64::max(residual, r);
        for (t, o) in total.iter_mut().zip(occ) {
            *t += w * o;
        }
    }
    for t in &mut total {
        *t /= 2.0 * PI;
    }
    let mut map = DensityMap::new(total, dof_grid, shape)?;
    map.residual = residual;
    Ok(map)
}

/// Sum of the map over x for every y index.
pub fn line_density_y(map: &DensityMap) -> Vec<f64> {
    let mut line = vec![0.0; map.shape.1];
    for (&v, &(_, y)) in map.values.iter().zip(&map.grid) {
        line[y] += v;
    }
    line
}
