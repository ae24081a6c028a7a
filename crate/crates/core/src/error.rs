// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use thiserror::Error;

use crate::model::Violation;

/// A named loop dimension of a convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Dimension {
    Batch,
    OutChannels,
    InChannels,
    Rows,
    Cols,
    Kernel,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Batch => "B",
            Dimension::OutChannels => "M",
            Dimension::InChannels => "N",
            Dimension::Rows => "R",
            Dimension::Cols => "C",
            Dimension::Kernel => "K",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid layer `{name}`: {reason}")]
    InvalidLayer { name: String, reason: String },

    #[error("infeasible design: {}", join_violations(.0))]
    Infeasible(Vec<Violation>),

    #[error("partition factor {factor} exceeds layer dimension {dimension} = {size}")]
    FactorExceedsDimension {
        dimension: Dimension,
        factor: u64,
        size: u64,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid transfer context: {0}")]
    InvalidContext(String),

    #[error("search space is empty: {0}")]
    EmptySearchSpace(String),

    #[error("no feasible design among {explored} enumerated points")]
    NoFeasibleDesign { explored: u64 },

    #[error("simulation deadlock at cycle {time}: {detail}")]
    Deadlock { time: u64, detail: String },

    #[error("buffer hazard at cycle {time}: {detail}")]
    BufferHazard { time: u64, detail: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
