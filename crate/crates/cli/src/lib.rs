//! Batch driver: solve, bench and partition commands writing CSV and JSON.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ndgreen::device::Device;
use ndgreen::driver::{SolverKind, SolverSetup};
use ndgreen::hsc::SolveLedger;
use ndgreen::observables::{electron_density, ldos, line_density_y, DensityMap, EnergyGrid};
use ndgreen::partition::{nested_dissection_with, rgf_chain_partition, validate_partition, SeparatorTree};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{PartitionMode, RunConfig};

pub use config::DeviceConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{source} (energy {energy} eV)")]
    AtEnergy {
        energy: f64,
        #[source]
        source: ndgreen::Error,
    },

    #[error(transparent)]
    Solver(ndgreen::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<ndgreen::Error> for CliError {
    fn from(e: ndgreen::Error) -> Self {
        match e {
            ndgreen::Error::Config(m) => CliError::Config(m),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    fn at_energy(energy: f64, e: ndgreen::Error) -> Self {
        match e {
            ndgreen::Error::Config(m) => CliError::Config(m),
            source => CliError::AtEnergy { energy, source },
        }
    }

    /// 2 for configuration errors, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::AtEnergy { .. } | CliError::Solver(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

/// Fixed 17-significant-digit rendering used in every CSV.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Results of a solve over the energy grid.
#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub grid: EnergyGrid,
    pub density: DensityMap,
    pub line_density: Vec<f64>,
    /// LDOS per energy, in dof order.
    pub ldos: Vec<Vec<f64>>,
    pub ledger: SolveLedger,
}

pub fn solve(cfg: &RunConfig) -> Result<SolveOutput, CliError> {
    let device = cfg.device.build(cfg.seed)?;
    let grid = cfg.energy.grid()?;
    let setup = SolverSetup::new(&device, &cfg.contact, cfg.solver, &cfg.partition.params())?;
    let points: Vec<_> = grid
        .energies()
        .par_iter()
        .map(|&e| -> Result<_, CliError> {
            let problem = device
                .problem(&cfg.contact, e, &cfg.bias, cfg.phonon_eta)
                .map_err(|err| CliError::at_energy(e, err))?;
            let mut ledger = SolveLedger::default();
            let g = setup.solve(&problem, true, &mut ledger).map_err(|err| CliError::at_energy(e, err))?;
            let gless = g.lesser_dof_diagonal().expect("lesser pass requested");
            Ok((ldos(&g.retarded_dof_diagonal()), gless, ledger))
        })
        .collect();
    let mut ldos_rows = Vec::with_capacity(points.len());
    let mut gless = Vec::with_capacity(points.len());
    let mut ledger = SolveLedger::default();
    for p in points {
        let (l, g, led) = p?;
        ldos_rows.push(l);
        gless.push(g);
        ledger += led;
    }
    let dof_grid = (0..device.n_dofs()).map(|d| device.grid_index(d)).collect();
    let density = electron_density(&gless, &grid, dof_grid, device.shape())?;
    let line_density = line_density_y(&density);
    Ok(SolveOutput {
        grid,
        density,
        line_density,
        ldos: ldos_rows,
        ledger,
    })
}

/// Write density.csv, ldos.csv and line_density.csv.
pub fn write_solve(out: &SolveOutput, dir: &Path) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let mut s = String::from("x_index,y_index,density\n");
    for (&v, &(x, y)) in out.density.values.iter().zip(&out.density.grid) {
        let _ = writeln!(s, "{x},{y},{}", num(v));
    }
    write_file(dir, "density.csv", &s)?;

    let mut s = String::from("x_index,y_index,energy_eV,ldos\n");
    for (&e, row) in out.grid.energies().iter().zip(&out.ldos) {
        let e = num(e);
        for (&v, &(x, y)) in row.iter().zip(&out.density.grid) {
            let _ = writeln!(s, "{x},{y},{e},{}", num(v));
        }
    }
    write_file(dir, "ldos.csv", &s)?;

    let mut s = String::from("y_index,density\n");
    for (y, &v) in out.line_density.iter().enumerate() {
        let _ = writeln!(s, "{y},{}", num(v));
    }
    write_file(dir, "line_density.csv", &s)
}

pub fn cmd_solve(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    write_solve(&solve(cfg)?, dir)
}

/// One bench.csv row.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub solver: SolverKind,
    pub nx: usize,
    pub ny: usize,
    /// None when the size was skipped by the memory cap.
    pub result: Option<BenchResult>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchResult {
    pub ledger: SolveLedger,
    pub wall_seconds: f64,
}

const BYTES_PER_ENTRY: f64 = 16.0;

/// Rough peak of the dense blocks a solver keeps for one energy, in MB.
pub fn dense_block_estimate_mb(device: &Device, setup: &SolverSetup) -> f64 {
    let entries = match (setup.kind(), setup.tree()) {
        (SolverKind::Hsc, Some(tree)) => {
            // Each cluster holds blocks against itself and its ancestors in
            // the factor, G and P working sets.
            let per: f64 = tree
                .clusters()
                .iter()
                .map(|c| {
                    let width: usize = c.dofs.len() + tree.ancestors(c.id).iter().map(|&a| tree.size(a)).sum::<usize>();
                    (c.dofs.len() * width) as f64
                })
                .sum();
            3.0 * per
        }
        (SolverKind::Dense, _) => 3.0 * (device.n_dofs() as f64).powi(2),
        _ => 8.0 * device.layers().iter().map(|l| (l.len() as f64).powi(2)).sum::<f64>(),
    };
    entries * BYTES_PER_ENTRY / 1e6
}

pub fn bench(cfg: &RunConfig) -> Result<Vec<BenchRow>, CliError> {
    let b = &cfg.bench;
    if b.sizes.is_empty() || b.solvers.is_empty() {
        return Err(CliError::Config("bench needs at least one size and one solver".into()));
    }
    let jobs: Vec<(SolverKind, usize, usize)> = b
        .sizes
        .iter()
        .flat_map(|&[nx, ny]| b.solvers.iter().map(move |&s| (s, nx, ny)))
        .collect();
    let rows: Vec<Result<BenchRow, CliError>> = jobs
        .par_iter()
        .map(|&(solver, nx, ny)| {
            let device = cfg.device.resized(nx, ny)?.build(cfg.seed)?;
            let setup = SolverSetup::new(&device, &cfg.contact, solver, &cfg.partition.params())?;
            if dense_block_estimate_mb(&device, &setup) > b.memory_cap_mb {
                return Ok(BenchRow { solver, nx, ny, result: None });
            }
            let problem = device
                .problem(&cfg.contact, b.energy, &cfg.bias, cfg.phonon_eta)
                .map_err(|e| CliError::at_energy(b.energy, e))?;
            let mut ledger = SolveLedger::default();
            let start = Instant::now();
            setup
                .solve(&problem, b.lesser, &mut ledger)
                .map_err(|e| CliError::at_energy(b.energy, e))?;
            let wall_seconds = start.elapsed().as_secs_f64();
            Ok(BenchRow {
                solver,
                nx,
                ny,
                result: Some(BenchResult { ledger, wall_seconds }),
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// bench.csv contents; wall time is "NA" unless `timing` is set.
pub fn bench_csv(rows: &[BenchRow], timing: bool) -> String {
    let mut s = String::from("solver,Nx,Ny,multiply_ops,inverse_ops,wall_seconds\n");
    for r in rows {
        let _ = match &r.result {
            Some(res) => {
                let total = res.ledger.total();
                let wall = if timing { num(res.wall_seconds) } else { "NA".into() };
                writeln!(
                    s,
                    "{},{},{},{},{},{wall}",
                    r.solver.name(),
                    r.nx,
                    r.ny,
                    total.multiply_ops,
                    total.inverse_ops
                )
            }
            None => writeln!(s, "{},{},{},skipped,skipped,skipped", r.solver.name(), r.nx, r.ny),
        };
    }
    s
}

pub fn cmd_bench(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let rows = bench(cfg)?;
    ensure_dir(dir)?;
    write_file(dir, "bench.csv", &bench_csv(&rows, cfg.timing))
}

/// The tree selected by the partition settings, with the device graph.
pub fn partition(cfg: &RunConfig) -> Result<(Device, SeparatorTree), CliError> {
    let device = cfg.device.build(cfg.seed)?;
    let tree = match cfg.partition.mode {
        PartitionMode::RgfChain => rgf_chain_partition(device.layers())?,
        PartitionMode::NestedDissection => {
            let atomic = device.atomic_groups(&cfg.contact)?;
            nested_dissection_with(&device.graph(), &atomic, cfg.partition.max_leaf, cfg.partition.placement)?
        }
    };
    Ok((device, tree))
}

/// Rule-1 violations followed by separator statistics.
pub fn validation_text(device: &Device, tree: &SeparatorTree) -> String {
    let report = validate_partition(tree, &device.graph());
    let mut s = String::new();
    let _ = writeln!(s, "violations: {}", report.violations.len());
    for v in &report.violations {
        let _ = writeln!(s, "  dofs {} {} in unrelated clusters {} {}", v.u, v.v, v.cluster_u, v.cluster_v);
    }
    let separators: Vec<usize> = tree
        .clusters()
        .iter()
        .filter(|c| !c.children.is_empty())
        .map(|c| c.dofs.len())
        .collect();
    let _ = writeln!(s, "dofs: {}", report.n_dofs);
    let _ = writeln!(s, "clusters: {}", report.n_clusters);
    let _ = writeln!(s, "levels: {}", report.levels);
    let _ = writeln!(s, "root size: {}", tree.size(tree.root()));
    let _ = writeln!(s, "separators: {}", separators.len());
    let _ = writeln!(s, "separator dofs: {}", separators.iter().sum::<usize>());
    let _ = writeln!(s, "max separator size: {}", report.max_separator_size);
    let _ = writeln!(s, "max leaf size: {}", report.max_leaf_size);
    s
}

pub fn cmd_partition(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let (device, tree) = partition(cfg)?;
    ensure_dir(dir)?;
    let json = serde_json::to_string_pretty(&tree.dump()).expect("tree dump serializes");
    write_file(dir, "tree.json", &(json + "\n"))?;
    write_file(dir, "validation.txt", &validation_text(&device, &tree))
}
