//! Distributed block-sparse multiplication over simulated ranks, with the
//! benchmark harness, reports and file IO around it.

pub mod bench;
pub mod cannon;
pub mod cli;
pub mod dist;
pub mod error;
pub mod grid;
pub mod io;
pub mod microbench;
pub mod report;
pub mod transport;

pub use cannon::{cannon_multiply, CannonOptions, CommStats};
pub use dist::{distribute, distribute_with, DistMatrix, Shard};
pub use error::{Error, Result};
pub use grid::ProcessGrid;
pub use transport::{channel_fabric, ChannelEndpoint, LinkModel, TransferHandle, Transport};
