//! Ops files for `sqnm audit`: a JSON array of free-operation descriptors.
//!
//! ```json
//! [{"op": "depolarize", "party": "A", "system": "A", "p": 0.3},
//!  {"op": "random_unitary", "party": "B", "system": "B", "seed": 7},
//!  {"op": "move", "from": "A", "to": "B", "system": "A2"}]
//! ```

use serde::{Deserialize, Serialize};

use sqnm::linalg::{self, c, CMat};
use sqnm::qstate::{random_isometry, random_unitary, QuantumChannel, RngSeed, SystemLayout};
use sqnm::resource::{FreeOperation, Party};

use crate::descriptor::{resolve, StateDescriptor};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpDescriptor {
    Depolarize { party: Party, system: String, dim: Option<usize>, p: f64 },
    Dephase { party: Party, system: String, dim: Option<usize> },
    Unitary { party: Party, system: String, matrix: Vec<Vec<[f64; 2]>> },
    RandomUnitary { party: Party, system: String, dim: Option<usize>, seed: u64 },
    /// Random channel with a `env`-dimensional Stinespring environment.
    RandomChannel { party: Party, system: String, dim: Option<usize>, env: usize, seed: u64 },
    /// Computational-basis measurement, outcome kept in `flag`.
    Measure { party: Party, system: String, dim: Option<usize>, flag: String, #[serde(default)] broadcast: bool },
    Move { from: Party, to: Party, system: String },
    Attach { with: Party, state: StateDescriptor },
}

pub fn parse(text: &str) -> CliResult<Vec<OpDescriptor>> {
    serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("ops parse error at line {}, column {}: {}", e.line(), e.column(), e)))
}

/// Build the operations; `dims` looks up system dimensions of the input state.
pub fn build(ops: &[OpDescriptor], dim_of: impl Fn(&str) -> Option<usize>) -> CliResult<Vec<FreeOperation>> {
    ops.iter().map(|o| build_one(o, &dim_of)).collect()
}

fn dim(system: &str, given: Option<usize>, dim_of: &impl Fn(&str) -> Option<usize>) -> CliResult<usize> {
    given
        .or_else(|| dim_of(system))
        .ok_or_else(|| CliError::input(format!("dimension of {system:?} unknown; give \"dim\"")))
}

fn build_one(o: &OpDescriptor, dim_of: &impl Fn(&str) -> Option<usize>) -> CliResult<FreeOperation> {
    let local = |party: Party, ch: QuantumChannel| FreeOperation::LocalChannel { party, channel: ch };
    Ok(match o {
        OpDescriptor::Depolarize { party, system, dim: d, p } => {
            let l = SystemLayout::single(system, dim(system, *d, dim_of)?)?;
            local(*party, QuantumChannel::depolarizing(l, *p)?)
        }
        OpDescriptor::Dephase { party, system, dim: d } => {
            local(*party, QuantumChannel::dephasing(SystemLayout::single(system, dim(system, *d, dim_of)?)?))
        }
        OpDescriptor::Unitary { party, system, matrix } => {
            let n = matrix.len();
            if matrix.iter().any(|r| r.len() != n) {
                return Err(CliError::input("unitary matrix must be square"));
            }
            let u = CMat::from_fn(n, n, |i, j| c(matrix[i][j][0], matrix[i][j][1]));
            local(*party, QuantumChannel::unitary(SystemLayout::single(system, n)?, u)?)
        }
        OpDescriptor::RandomUnitary { party, system, dim: d, seed } => {
            let n = dim(system, *d, dim_of)?;
            let u = random_unitary(n, RngSeed(*seed))?;
            local(*party, QuantumChannel::unitary(SystemLayout::single(system, n)?, u)?)
        }
        OpDescriptor::RandomChannel { party, system, dim: d, env, seed } => {
            let n = dim(system, *d, dim_of)?;
            let v = random_isometry(n, n * (*env).max(1), RngSeed(*seed))?;
            let l = SystemLayout::single(system, n)?;
            local(*party, QuantumChannel::new(l.clone(), l, v, (*env).max(1))?)
        }
        OpDescriptor::Measure { party, system, dim: d, flag, broadcast } => {
            let n = dim(system, *d, dim_of)?;
            let branches = (0..n)
                .map(|k| {
                    let mut p = linalg::zeros(n, n);
                    p[(k, k)] = c(1.0, 0.0);
                    vec![p]
                })
                .collect();
            let l = SystemLayout::single(system, n)?;
            FreeOperation::InstrumentWithFlag {
                party: *party,
                inputs: l.clone(),
                outputs: l,
                branches,
                flag: flag.clone(),
                broadcast: *broadcast,
            }
        }
        OpDescriptor::Move { from, to, system } => {
            FreeOperation::MoveSubsystem { from: *from, to: *to, system: system.clone() }
        }
        OpDescriptor::Attach { with, state } => FreeOperation::AttachState { with: *with, state: resolve(state)?.state },
    })
}
