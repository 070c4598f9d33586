//! One solver setup per device, reused across energy points.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::device::{ContactModel, Device, Problem};
use crate::error::{Error, Result};
use crate::hsc::{solve_hsc, Schedule, SolveLedger};
use crate::oracle::solve_dense;
use crate::partition::{nested_dissection_with, GroupPlacement, SeparatorTree};
use crate::rgf::solve_rgf;
use crate::sparse::GreensDiagonal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Rgf,
    Hsc,
    Dense,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Rgf => "rgf",
            SolverKind::Hsc => "hsc",
            SolverKind::Dense => "dense",
        }
    }
}

/// Nested dissection parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionParams {
    pub max_leaf: usize,
    pub placement: GroupPlacement,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams {
            max_leaf: 64,
            placement: GroupPlacement::default(),
        }
    }
}

/// Partition and reporting groups for one solver on one device.
#[derive(Clone, Debug)]
pub struct SolverSetup {
    kind: SolverKind,
    tree: Option<Arc<SeparatorTree>>,
    groups: Vec<Vec<usize>>,
}

impl SolverSetup {
    pub fn new(device: &Device, contact: &ContactModel, kind: SolverKind, params: &PartitionParams) -> Result<Self> {
        let (tree, groups) = match kind {
            SolverKind::Rgf | SolverKind::Dense => (None, device.layers().to_vec()),
            SolverKind::Hsc => {
                let atomic = device.atomic_groups(contact)?;
                let tree = nested_dissection_with(&device.graph(), &atomic, params.max_leaf, params.placement)?;
                let groups = tree.clusters().iter().map(|c| c.dofs.clone()).collect();
                (Some(Arc::new(tree)), groups)
            }
        };
        Ok(SolverSetup { kind, tree, groups })
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    /// The separator tree of an HSC setup.
    pub fn tree(&self) -> Option<&Arc<SeparatorTree>> {
        self.tree.as_ref()
    }

    /// Dof groups of the returned diagonal blocks.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Diagonal blocks of G^r, and of G^< when `lesser` is set.
    pub fn solve(&self, problem: &Problem, lesser: bool, ledger: &mut SolveLedger) -> Result<GreensDiagonal> {
        let sigma = lesser.then_some(&problem.sigma_lesser);
        match self.kind {
            SolverKind::Rgf => solve_rgf(&problem.a, sigma, &self.groups, problem.energy, ledger),
            SolverKind::Hsc => {
                let tree = self.tree.clone().ok_or_else(|| Error::Contract("HSC setup without a tree".into()))?;
                solve_hsc(&problem.a, sigma, tree, problem.energy, Schedule::Pruned, ledger)
            }
            SolverKind::Dense => solve_dense(&problem.a, sigma, &self.groups, problem.energy),
        }
    }
}
