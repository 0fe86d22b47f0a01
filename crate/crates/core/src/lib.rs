// SPDX-License-Identifier: Apache-2.0

//! Coarsened multi-level explanations for graph-based malware detectors.
//!
//! Control-flow graphs are coarsened, classified with a small GCN and
//! explained with Integrated Gradients over an edge mask. The selected
//! coarse explanation is mapped back through the coarsening map and the
//! basic-block/instruction correspondence to an instruction-level graph,
//! on which a second GCN is trained and explained.

pub mod afg;
pub mod backtrack;
pub mod coarsen;
pub mod encode;
pub mod error;
pub mod explain;
pub mod gnn;
pub mod graphdata;
pub mod metrics;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
