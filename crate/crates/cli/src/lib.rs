//! Front end for the `sqnm` binary: state descriptors, report assembly, the
//! command implementations and the acceptance criteria runner shared by
//! `sqnm selftest` and the acceptance test target.

pub mod commands;
pub mod criteria;
pub mod descriptor;
pub mod ops;
pub mod report;

use std::fmt;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Input = 1,
    Budget = 2,
    Infeasible = 3,
    SelfTest = 4,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { exit: Exit::Input, message: message.into() }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self { exit: Exit::Infeasible, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Library errors map onto the exit-code contract: requests the numerics
/// cannot serve are exit 3, everything else is an input problem.
impl From<sqnm::Error> for CliError {
    fn from(e: sqnm::Error) -> Self {
        use sqnm::Error as E;
        let exit = match e {
            E::MemoryCap(_) | E::Degenerate(_) | E::Precondition(_) => Exit::Infeasible,
            _ => Exit::Input,
        };
        Self { exit, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
