// SPDX-License-Identifier: Apache-2.0

//! Latency and resource model for tiled CNN accelerators on one or more
//! FPGAs, with a design-space search, a cluster planner and a
//! cycle-counting simulator used to cross-check the model.

pub mod cluster;
pub mod dse;
pub mod error;
pub mod model;
pub mod network;
pub mod sim;
pub mod xfer;

pub use error::{Dimension, ModelError, Result};
