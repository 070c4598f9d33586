//! Run configuration, read from one JSON document.

use std::path::Path;

use ndgreen::device::{Bias, ContactModel, Device, GrapheneSpec, SuperlatticeSpec, SyntheticSpec};
use ndgreen::driver::{PartitionParams, SolverKind};
use ndgreen::observables::EnergyGrid;
use ndgreen::partition::GroupPlacement;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DeviceConfig {
    Superlattice(SuperlatticeSpec),
    Graphene(GrapheneSpec),
    Synthetic(SyntheticSpec),
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig::Superlattice(SuperlatticeSpec::default())
    }
}

impl DeviceConfig {
    pub fn build(&self, seed: u64) -> ndgreen::Result<Device> {
        match self {
            DeviceConfig::Superlattice(s) => s.build(),
            DeviceConfig::Graphene(s) => s.build(),
            DeviceConfig::Synthetic(s) => s.build(seed),
        }
    }

    /// The same kind of device resized to nx by ny. Superlattices keep their
    /// material parameters and scale the barrier stack to the new length.
    pub fn resized(&self, nx: usize, ny: usize) -> ndgreen::Result<DeviceConfig> {
        Ok(match self {
            DeviceConfig::Superlattice(s) => DeviceConfig::Superlattice(SuperlatticeSpec {
                barrier_height: s.barrier_height,
                effective_mass: s.effective_mass,
                ..SuperlatticeSpec::fitted(nx, ny)?
            }),
            DeviceConfig::Graphene(s) => DeviceConfig::Graphene(GrapheneSpec { nx, ny, ..s.clone() }),
            DeviceConfig::Synthetic(s) => DeviceConfig::Synthetic(SyntheticSpec { nx, ny, ..s.clone() }),
        })
    }
}

/// Energy points: a uniform trapezoid grid or explicit points and weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum EnergyConfig {
    Uniform { min: f64, max: f64, points: usize },
    Custom { energies: Vec<f64>, weights: Vec<f64> },
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig::Uniform {
            min: 0.0,
            max: 0.5,
            points: 100,
        }
    }
}

impl EnergyConfig {
    pub fn grid(&self) -> ndgreen::Result<EnergyGrid> {
        match self {
            EnergyConfig::Uniform { min, max, points } => EnergyGrid::uniform(*min, *max, *points),
            EnergyConfig::Custom { energies, weights } => EnergyGrid::custom(energies.clone(), weights.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    #[default]
    NestedDissection,
    RgfChain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub mode: PartitionMode,
    pub max_leaf: usize,
    pub placement: GroupPlacement,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        let p = PartitionParams::default();
        PartitionConfig {
            mode: PartitionMode::default(),
            max_leaf: p.max_leaf,
            placement: p.placement,
        }
    }
}

impl PartitionConfig {
    pub fn params(&self) -> PartitionParams {
        PartitionParams {
            max_leaf: self.max_leaf,
            placement: self.placement,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub solvers: Vec<SolverKind>,
    /// (nx, ny) pairs.
    pub sizes: Vec<[usize; 2]>,
    /// Energy of the single benchmark point.
    pub energy: f64,
    /// Also run the G^< pass.
    pub lesser: bool,
    /// Sizes whose dense-block estimate exceeds this are skipped.
    pub memory_cap_mb: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            solvers: vec![SolverKind::Rgf, SolverKind::Hsc],
            sizes: vec![[32, 32], [64, 64]],
            energy: 0.1,
            lesser: true,
            memory_cap_mb: 4096.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub device: DeviceConfig,
    pub solver: SolverKind,
    pub contact: ContactModel,
    pub energy: EnergyConfig,
    pub partition: PartitionConfig,
    pub bias: Bias,
    /// Broadening of the diagonal phonon self-energy; 0 disables it.
    pub phonon_eta: f64,
    pub seed: u64,
    /// Record wall-clock seconds in bench.csv; "NA" otherwise.
    pub timing: bool,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            device: DeviceConfig::default(),
            solver: SolverKind::Hsc,
            contact: ContactModel::default(),
            energy: EnergyConfig::default(),
            partition: PartitionConfig::default(),
            bias: Bias::default(),
            phonon_eta: 0.0,
            seed: 0,
            timing: true,
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        // serde_json messages carry the line and column.
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
