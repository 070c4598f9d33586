//! Device Hamiltonians, lead self-energies and lesser self-energies.
//!
//! Dofs are numbered layer by layer along the transport direction y; the
//! layer map groups them so that only adjacent layers couple.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{gemm, inverse, product, CMatrix, FlopLedger, Op, C64};
use crate::error::{Error, Result};
use crate::partition::Graph;
use crate::sparse::{assemble_system, DofBlock, SelfEnergy, SparseCoo};

/// hbar^2 / (2 m0) in eV nm^2.
pub const HBAR2_OVER_2M0: f64 = 0.038_099_8;
/// Boltzmann constant in eV/K.
pub const BOLTZMANN_EV: f64 = 8.617_333_262e-5;
/// Carbon-carbon bond length in nm.
pub const GRAPHENE_BOND_NM: f64 = 0.142;

const DECIMATION_TOL: f64 = 1e-10;
const DECIMATION_MAX_ITER: usize = 200;

/// Fermi-Dirac occupation.
pub fn fermi(energy: f64, mu: f64, temperature: f64) -> f64 {
    let x = (energy - mu) / (BOLTZMANN_EV * temperature);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Barrier/well superlattice on a five-point grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperlatticeSpec {
    pub nx: usize,
    pub ny: usize,
    /// Grid spacings in nm.
    pub dx: f64,
    pub dy: f64,
    pub barriers: usize,
    /// Widths in nm.
    pub barrier_width: f64,
    pub well_width: f64,
    /// Barrier height in eV.
    pub barrier_height: f64,
    pub left_flat: f64,
    pub right_flat: f64,
    /// Effective mass in units of the free-electron mass.
    pub effective_mass: f64,
}

impl Default for SuperlatticeSpec {
    fn default() -> Self {
        SuperlatticeSpec {
            nx: 50,
            ny: 200,
            dx: 0.1,
            dy: 0.1,
            barriers: 8,
            barrier_width: 1.0,
            well_width: 1.0,
            barrier_height: 0.4,
            left_flat: 2.0,
            right_flat: 3.0,
            effective_mass: 0.067,
        }
    }
}

fn cells(width: f64, dy: f64, what: &str) -> Result<usize> {
    let c = width / dy;
    if width < 0.0 || (c - c.round()).abs() > 1e-6 {
        return Err(Error::Config(format!("{what} {width} nm is not a multiple of dy = {dy} nm")));
    }
    Ok(c.round() as usize)
}

impl SuperlatticeSpec {
    /// Default geometry rescaled onto an nx-by-ny grid: the eight-barrier
    /// stack keeps equal barrier and well cell counts and the remaining rows
    /// are split 2:3 between the flat regions.
    pub fn fitted(nx: usize, ny: usize) -> Result<Self> {
        let d = SuperlatticeSpec::default();
        let per_nm = ny as f64 / 20.0;
        let b = (per_nm.floor() as usize).max(1);
        let stack = d.barriers * b + (d.barriers - 1) * b;
        if stack > ny {
            return Err(Error::Config(format!("ny = {ny} cannot hold the {stack}-row barrier stack")));
        }
        let rest = ny - stack;
        let left = rest * 2 / 5;
        Ok(SuperlatticeSpec {
            nx,
            ny,
            barrier_width: b as f64 * d.dy,
            well_width: b as f64 * d.dy,
            left_flat: left as f64 * d.dy,
            right_flat: (rest - left) as f64 * d.dy,
            ..d
        })
    }

    /// Hopping energies (t_x, t_y) in eV.
    pub fn hopping(&self) -> (f64, f64) {
        let t = |d: f64| HBAR2_OVER_2M0 / (self.effective_mass * d * d);
        (t(self.dx), t(self.dy))
    }

    /// Row counts (left flat, barrier, well, right flat).
    fn layout(&self) -> Result<(usize, usize, usize, usize)> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Config("superlattice grid must be at least 1x1".into()));
        }
        if !(self.dx > 0.0 && self.dy > 0.0 && self.effective_mass > 0.0) {
            return Err(Error::Config("dx, dy and the effective mass must be positive".into()));
        }
        let left = cells(self.left_flat, self.dy, "left flat region")?;
        let right = cells(self.right_flat, self.dy, "right flat region")?;
        let b = cells(self.barrier_width, self.dy, "barrier width")?;
        let w = cells(self.well_width, self.dy, "well width")?;
        let wells = self.barriers.saturating_sub(1);
        let total = self.left_flat + self.barriers as f64 * self.barrier_width + wells as f64 * self.well_width + self.right_flat;
        let length = self.ny as f64 * self.dy;
        if (total - length).abs() > self.dy / 2.0 {
            return Err(Error::Config(format!(
                "geometry spans {total} nm but the grid is {length} nm long"
            )));
        }
        Ok((left, b, w, right))
    }

    /// Rows [start, end) of the barrier stack.
    pub fn stack_rows(&self) -> Result<(usize, usize)> {
        let (left, b, w, _) = self.layout()?;
        let len = self.barriers * b + self.barriers.saturating_sub(1) * w;
        Ok((left, left + len))
    }

    /// Potential of grid row y.
    pub fn potential_row(&self, y: usize) -> Result<f64> {
        let (left, b, w, _) = self.layout()?;
        let (start, end) = self.stack_rows()?;
        if y < start || y >= end {
            return Ok(0.0);
        }
        Ok(if (y - left) % (b + w) < b { self.barrier_height } else { 0.0 })
    }

    /// Potential at position y in nm; the cell is floor(y / dy).
    pub fn potential_at(&self, y_nm: f64) -> Result<f64> {
        let row = (y_nm / self.dy + 1e-9).floor();
        if row < 0.0 || row as usize >= self.ny {
            return Err(Error::Config(format!("y = {y_nm} nm lies outside the device")));
        }
        self.potential_row(row as usize)
    }

    pub fn build(&self) -> Result<Device> {
        self.layout()?;
        let (nx, ny) = (self.nx, self.ny);
        let (tx, ty) = self.hopping();
        let id = |x: usize, y: usize| y * nx + x;
        let mut t = Vec::with_capacity(5 * nx * ny);
        for y in 0..ny {
            let v = self.potential_row(y)?;
            for x in 0..nx {
                t.push((id(x, y), id(x, y), C64::new(2.0 * tx + 2.0 * ty + v, 0.0)));
                if x + 1 < nx {
                    t.push((id(x, y), id(x + 1, y), C64::new(-tx, 0.0)));
                    t.push((id(x + 1, y), id(x, y), C64::new(-tx, 0.0)));
                }
                if y + 1 < ny {
                    t.push((id(x, y), id(x, y + 1), C64::new(-ty, 0.0)));
                    t.push((id(x, y + 1), id(x, y), C64::new(-ty, 0.0)));
                }
            }
        }
        let h = SparseCoo::from_triplets(nx * ny, t)?;
        Ok(Device::grid(h, nx, ny, self.dx, self.dy, 1))
    }
}

/// Armchair graphene nanoribbon, transport along y.
///
/// Zigzag chains of 2*nx atoms run across the ribbon. Each chain splits into
/// two atom layers of nx atoms by height, so a hexagon row spans four
/// layers and only adjacent layers couple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrapheneSpec {
    /// Atoms per atom layer.
    pub nx: usize,
    /// Atom layers along transport.
    pub ny: usize,
    pub onsite: f64,
    pub hopping: f64,
}

impl Default for GrapheneSpec {
    fn default() -> Self {
        GrapheneSpec {
            nx: 8,
            ny: 16,
            onsite: 0.0,
            hopping: -3.1,
        }
    }
}

impl GrapheneSpec {
    /// Chain position i of the k-th atom in atom layer l.
    fn chain_index(l: usize, k: usize) -> usize {
        let (j, h) = (l / 2, l % 2);
        // Lower atoms have i + j odd, upper atoms i + j even.
        let parity = if h == 0 { (j + 1) % 2 } else { j % 2 };
        2 * k + parity
    }

    pub fn build(&self) -> Result<Device> {
        let (nx, ny) = (self.nx, self.ny);
        if nx == 0 || ny == 0 {
            return Err(Error::Config("graphene ribbon needs at least one atom per layer and one layer".into()));
        }
        if self.hopping == 0.0 || !self.hopping.is_finite() || !self.onsite.is_finite() {
            return Err(Error::Config("graphene hopping must be finite and nonzero".into()));
        }
        let n = nx * ny;
        let id = |l: usize, i: usize| l * nx + i / 2;
        let hop = C64::new(self.hopping, 0.0);
        let mut t: Vec<(usize, usize, C64)> = (0..n).map(|d| (d, d, C64::new(self.onsite, 0.0))).collect();
        let mut bond = |a: usize, b: usize| {
            t.push((a, b, hop));
            t.push((b, a, hop));
        };
        for l in 0..ny {
            let (j, h) = (l / 2, l % 2);
            for k in 0..nx {
                let i = Self::chain_index(l, k);
                if h == 0 && l + 1 < ny {
                    // Zigzag bonds to the upper atoms on either side.
                    if i > 0 {
                        bond(id(l, i), id(l + 1, i - 1));
                    }
                    if i + 1 < 2 * nx {
                        bond(id(l, i), id(l + 1, i + 1));
                    }
                }
                if h == 1 && l + 1 < ny {
                    // Vertical bond to the same column of the next chain.
                    debug_assert_eq!((i + j) % 2, 0);
                    bond(id(l, i), id(l + 1, i));
                }
            }
        }
        let h = SparseCoo::from_triplets(n, t)?;
        let a = GRAPHENE_BOND_NM;
        let mut coords = Vec::with_capacity(n);
        let mut grid = Vec::with_capacity(n);
        for l in 0..ny {
            for k in 0..nx {
                let i = Self::chain_index(l, k);
                let y = (l / 2) as f64 * 1.5 * a + (l % 2) as f64 * 0.5 * a;
                coords.push([i as f64 * 3f64.sqrt() / 2.0 * a, y]);
                grid.push((k, l));
            }
        }
        let layers = (0..ny).map(|l| (l * nx..(l + 1) * nx).collect()).collect();
        Ok(Device {
            h,
            layers,
            coords,
            grid,
            nx,
            ny,
            period: 4,
        })
    }
}

/// Random real-symmetric five-point Hamiltonian, for fuzzing the solvers on
/// a physical pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub nx: usize,
    pub ny: usize,
    /// Onsite energies are drawn from [-disorder, disorder] eV.
    pub disorder: f64,
    /// Mean nearest-neighbour hopping in eV.
    pub hopping: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            nx: 8,
            ny: 8,
            disorder: 0.5,
            hopping: -1.0,
        }
    }
}

impl SyntheticSpec {
    pub fn build(&self, seed: u64) -> Result<Device> {
        let (nx, ny) = (self.nx, self.ny);
        if nx == 0 || ny == 0 {
            return Err(Error::Config("synthetic grid must be at least 1x1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = |x: usize, y: usize| y * nx + x;
        let mut t = Vec::new();
        let draw_hop = |r: &mut ChaCha8Rng| C64::new(self.hopping * (1.0 + 0.2 * r.gen_range(-1.0..1.0)), 0.0);
        for y in 0..ny {
            for x in 0..nx {
                let onsite = if self.disorder > 0.0 { rng.gen_range(-self.disorder..self.disorder) } else { 0.0 };
                t.push((id(x, y), id(x, y), C64::new(onsite, 0.0)));
                if x + 1 < nx {
                    let v = draw_hop(&mut rng);
                    t.push((id(x, y), id(x + 1, y), v));
                    t.push((id(x + 1, y), id(x, y), v));
                }
                if y + 1 < ny {
                    let v = draw_hop(&mut rng);
                    t.push((id(x, y), id(x, y + 1), v));
                    t.push((id(x, y + 1), id(x, y), v));
                }
            }
        }
        let h = SparseCoo::from_triplets(nx * ny, t)?;
        Ok(Device::grid(h, nx, ny, 1.0, 1.0, 1))
    }
}

/// Semi-infinite lead: onsite cell block and coupling to the next cell
/// further from the device.
#[derive(Clone, Debug, PartialEq)]
pub struct LeadBlocks {
    pub h00: CMatrix,
    pub h01: CMatrix,
}

/// Sigma = H01^H g_s H01 with g_s = ((E + i eta) I - H00 - H01^H g_s H01)^{-1},
/// by Sancho-Rubio decimation.
pub fn surface_self_energy(lead: &LeadBlocks, energy: f64, eta: f64) -> Result<CMatrix> {
    if eta <= 0.0 {
        return Err(Error::Config(format!("lead broadening must be positive, got {eta}")));
    }
    let n = lead.h00.rows();
    if lead.h00.shape() != (n, n) || lead.h01.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            op: "lead blocks",
            left: lead.h00.shape(),
            right: lead.h01.shape(),
        });
    }
    let g_s = surface_green(lead, energy, eta)?;
    let mut scratch = FlopLedger::new();
    let tail = product(&g_s, Op::N, &lead.h01, Op::N, &mut scratch)?;
    let sigma = product(&lead.h01, Op::C, &tail, Op::N, &mut scratch)?;
    let real = |m: &CMatrix| m.as_slice().iter().all(|v| v.im == 0.0);
    if real(&lead.h00) && real(&lead.h01) && lead.h00.symmetry_deviation() == 0.0 {
        // Exactly complex symmetric for a real lead; drop the roundoff.
        let t = sigma.transpose();
        return Ok(CMatrix::from_fn(n, n, |i, j| (sigma[(i, j)] + t[(i, j)]) * 0.5));
    }
    Ok(sigma)
}

fn z_minus(h: &CMatrix, z: C64) -> CMatrix {
    let mut m = h.neg();
    for i in 0..m.rows() {
        m[(i, i)] += z;
    }
    m
}

/// Surface Green's function of the lead.
pub fn surface_green(lead: &LeadBlocks, energy: f64, eta: f64) -> Result<CMatrix> {
    let z = C64::new(energy, eta);
    let one = C64::new(1.0, 0.0);
    let mut scratch = FlopLedger::new();
    // Coupling from the surface cell into the bulk and back.
    let mut alpha = lead.h01.adjoint();
    let mut beta = lead.h01.clone();
    let mut eps_s = lead.h00.clone();
    let mut eps = lead.h00.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < DECIMATION_MAX_ITER {
        iterations += 1;
        let g = inverse(&z_minus(&eps, z), &mut scratch)?;
        let ga = product(&g, Op::N, &alpha, Op::N, &mut scratch)?;
        let gb = product(&g, Op::N, &beta, Op::N, &mut scratch)?;
        let agb = product(&alpha, Op::N, &gb, Op::N, &mut scratch)?;
        let bga = product(&beta, Op::N, &ga, Op::N, &mut scratch)?;
        eps_s.add_assign_matrix(&agb)?;
        eps.add_assign_matrix(&agb)?;
        eps.add_assign_matrix(&bga)?;
        alpha = product(&alpha, Op::N, &ga, Op::N, &mut scratch)?;
        beta = product(&beta, Op::N, &gb, Op::N, &mut scratch)?;
        if alpha.frobenius_norm() + beta.frobenius_norm() < DECIMATION_TOL {
            converged = true;
            break;
        }
    }
    let g_s = inverse(&z_minus(&eps_s, z), &mut scratch)?;
    // Fixed-point residual ||g_s - (z - H00 - H01^H g_s H01)^{-1}||_F,
    // relative to ||g_s||_F once that exceeds 1.
    let mut m = z_minus(&lead.h00, z);
    let tail = product(&g_s, Op::N, &lead.h01, Op::N, &mut scratch)?;
    gemm(-one, &lead.h01, Op::C, &tail, Op::N, one, &mut m, &mut scratch)?;
    let residual = g_s.difference(&inverse(&m, &mut scratch)?)?.frobenius_norm() / g_s.frobenius_norm().max(1.0);
    if !converged || !(residual <= DECIMATION_TOL) {
        return Err(Error::Convergence { iterations, residual });
    }
    Ok(g_s)
}

/// How the contacts enter Sigma^r.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContactModel {
    /// Sigma = -i eta on every dof of the first and last layers.
    Diagonal { eta: f64 },
    /// Dense surface self-energy of a semi-infinite periodic extension of the
    /// end cells.
    DenseLead { eta: f64 },
}

impl Default for ContactModel {
    fn default() -> Self {
        ContactModel::DenseLead { eta: 1e-6 }
    }
}

/// Chemical potentials and temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bias {
    pub mu_left: f64,
    pub mu_right: f64,
    /// Occupation reference for the phonon self-energy.
    pub fermi_energy: f64,
    pub temperature: f64,
}

impl Default for Bias {
    fn default() -> Self {
        Bias {
            mu_left: 0.14,
            mu_right: 0.14,
            fermi_energy: 0.14,
            temperature: 300.0,
        }
    }
}

impl Bias {
    /// Zero bias at the given Fermi energy.
    pub fn equilibrium(fermi_energy: f64, temperature: f64) -> Self {
        Bias {
            mu_left: fermi_energy,
            mu_right: fermi_energy,
            fermi_energy,
            temperature,
        }
    }
}

/// Retarded contact and phonon self-energies at one energy.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfEnergySet {
    pub left: DofBlock,
    pub right: DofBlock,
    /// Diagonal phonon self-energy on interior dofs.
    pub phonon: Vec<(usize, C64)>,
}

impl SelfEnergySet {
    pub fn retarded(&self) -> SelfEnergy {
        SelfEnergy {
            blocks: vec![self.left.clone(), self.right.clone()],
            diagonal: self.phonon.clone(),
        }
    }

    /// Sigma^<_c = -f_c (Sigma_c - Sigma_c^H); skew-Hermitian by construction.
    pub fn lesser(&self, energy: f64, bias: &Bias) -> Result<SelfEnergy> {
        if !(bias.temperature > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        let contact = |b: &DofBlock, mu: f64| {
            let f = fermi(energy, mu, bias.temperature);
            let mut block = b.block.difference(&b.block.adjoint()).expect("square block");
            block.scale(C64::new(-f, 0.0));
            DofBlock {
                dofs: b.dofs.clone(),
                block,
            }
        };
        let f_ph = fermi(energy, bias.fermi_energy, bias.temperature);
        Ok(SelfEnergy {
            blocks: vec![contact(&self.left, bias.mu_left), contact(&self.right, bias.mu_right)],
            diagonal: self
                .phonon
                .iter()
                .map(|&(d, s)| (d, C64::new(-f_ph, 0.0) * (s - s.conj())))
                .collect(),
        })
    }
}

/// Which end of the device.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A = E I - H - Sigma^r and Sigma^< at one energy.
#[derive(Clone, Debug)]
pub struct Problem {
    pub energy: f64,
    pub a: SparseCoo,
    pub sigma_lesser: SparseCoo,
}

/// A device Hamiltonian with its layer map and geometry.
#[derive(Clone, Debug)]
pub struct Device {
    h: SparseCoo,
    layers: Vec<Vec<usize>>,
    coords: Vec<[f64; 2]>,
    /// (x_index, y_index) per dof.
    grid: Vec<(usize, usize)>,
    nx: usize,
    ny: usize,
    /// Layers per lead unit cell.
    period: usize,
}

impl Device {
    fn grid(h: SparseCoo, nx: usize, ny: usize, dx: f64, dy: f64, period: usize) -> Self {
        let mut coords = Vec::with_capacity(nx * ny);
        let mut grid = Vec::with_capacity(nx * ny);
        for y in 0..ny {
            for x in 0..nx {
                coords.push([x as f64 * dx, y as f64 * dy]);
                grid.push((x, y));
            }
        }
        Device {
            h,
            layers: (0..ny).map(|y| (y * nx..(y + 1) * nx).collect()).collect(),
            coords,
            grid,
            nx,
            ny,
            period,
        }
    }

    pub fn hamiltonian(&self) -> &SparseCoo {
        &self.h
    }

    pub fn n_dofs(&self) -> usize {
        self.h.dim()
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// (x_index, y_index) of a dof.
    pub fn grid_index(&self, dof: usize) -> (usize, usize) {
        self.grid[dof]
    }

    /// Grid shape (nx, ny); every dof has x_index < nx and y_index < ny.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Layers per lead unit cell.
    pub fn lead_period(&self) -> usize {
        self.period
    }

    /// Adjacency of H with coordinates.
    pub fn graph(&self) -> Graph {
        Graph::from_sparse(&self.h)
            .with_coords(self.coords.clone())
            .expect("one coordinate per dof")
    }

    fn cell(&self, first_layer: usize) -> Vec<usize> {
        self.layers[first_layer..first_layer + self.period].concat()
    }

    /// Lead blocks for the periodic extension of one end cell, with the
    /// device dofs of that cell.
    pub fn lead(&self, side: Side) -> Result<(LeadBlocks, Vec<usize>)> {
        let p = self.period;
        if self.ny < 2 * p || !self.ny.is_multiple_of(p) {
            return Err(Error::Config(format!(
                "dense leads need a whole number of at least two {p}-layer cells, got {} layers",
                self.ny
            )));
        }
        let (own, inner) = match side {
            Side::Left => (self.cell(0), self.cell(p)),
            Side::Right => (self.cell(self.ny - p), self.cell(self.ny - 2 * p)),
        };
        let h00 = self.h.submatrix(&own, &own);
        // The coupling from the surface cell into the lead repeats the
        // device's coupling across the end cell boundary.
        let h01 = match side {
            Side::Left => self.h.submatrix(&own, &inner),
            Side::Right => self.h.submatrix(&inner, &own).adjoint(),
        };
        Ok((LeadBlocks { h00, h01 }, own))
    }

    /// Dofs that carry the contact self-energy of one side.
    pub fn contact_dofs(&self, contact: &ContactModel, side: Side) -> Result<Vec<usize>> {
        match contact {
            ContactModel::Diagonal { .. } => Ok(match side {
                Side::Left => self.layers[0].clone(),
                Side::Right => self.layers[self.ny - 1].clone(),
            }),
            ContactModel::DenseLead { .. } => {
                let (lead, dofs) = self.lead(side)?;
                // Sigma = H01^H g H01 is supported on the nonzero columns of H01.
                Ok(dofs
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| (0..lead.h01.rows()).any(|r| lead.h01[(r, c)] != C64::default()))
                    .map(|(_, &d)| d)
                    .collect())
            }
        }
    }

    /// Groups of dofs coupled densely by the contacts; these must not be
    /// split by a partition.
    pub fn atomic_groups(&self, contact: &ContactModel) -> Result<Vec<Vec<usize>>> {
        match contact {
            ContactModel::Diagonal { .. } => Ok(Vec::new()),
            ContactModel::DenseLead { .. } => {
                let left = self.contact_dofs(contact, Side::Left)?;
                let right = self.contact_dofs(contact, Side::Right)?;
                if left.iter().any(|d| right.contains(d)) {
                    let mut all = left;
                    all.extend(right);
                    all.sort_unstable();
                    all.dedup();
                    Ok(vec![all])
                } else {
                    Ok(vec![left, right])
                }
            }
        }
    }

    /// Contact and phonon self-energies at one energy.
    pub fn self_energies(&self, contact: &ContactModel, energy: f64, phonon_eta: f64) -> Result<SelfEnergySet> {
        let sides = [Side::Left, Side::Right].map(|side| -> Result<DofBlock> {
            match *contact {
                ContactModel::Diagonal { eta } => {
                    if !(eta > 0.0) {
                        return Err(Error::Config(format!("contact broadening must be positive, got {eta}")));
                    }
                    let dofs = self.contact_dofs(contact, side)?;
                    let block = CMatrix::from_diag(&vec![C64::new(0.0, -eta); dofs.len()]);
                    Ok(DofBlock { dofs, block })
                }
                ContactModel::DenseLead { eta } => {
                    let (lead, cell) = self.lead(side)?;
                    let sigma = surface_self_energy(&lead, energy, eta)?;
                    let support = self.contact_dofs(contact, side)?;
                    let local: Vec<usize> = support
                        .iter()
                        .map(|d| cell.iter().position(|c| c == d).expect("support lies in the cell"))
                        .collect();
                    Ok(DofBlock {
                        dofs: support,
                        block: sigma.select(&local, &local),
                    })
                }
            }
        });
        let [left, right] = sides;
        let (left, right) = (left?, right?);
        let mut phonon = Vec::new();
        if phonon_eta > 0.0 {
            let edge: Vec<bool> = (0..self.n_dofs())
                .map(|d| left.dofs.contains(&d) || right.dofs.contains(&d))
                .collect();
            phonon = (0..self.n_dofs())
                .filter(|&d| !edge[d])
                .map(|d| (d, C64::new(0.0, -phonon_eta)))
                .collect();
        } else if phonon_eta < 0.0 {
            return Err(Error::Config("phonon broadening must be nonnegative".into()));
        }
        Ok(SelfEnergySet { left, right, phonon })
    }

    /// System matrix and lesser self-energy at one energy.
    pub fn problem(&self, contact: &ContactModel, energy: f64, bias: &Bias, phonon_eta: f64) -> Result<Problem> {
        let set = self.self_energies(contact, energy, phonon_eta)?;
        let a = assemble_system(&self.h, &set.retarded(), energy)?;
        let sigma_lesser = set.lesser(energy, bias)?.to_coo(self.n_dofs())?;
        Ok(Problem { energy, a, sigma_lesser })
    }
}
