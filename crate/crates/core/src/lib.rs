//! Continuous ant-based neural topology search.
//!
//! Cant agents walk a stack of continuous unit planes, one plane per recurrent
//! time lag, guided by pheromone deposits. Their paths are condensed with
//! DBSCAN into centroids, the centroids become the nodes of a recurrent
//! network genome, and genomes are trained with backpropagation through time
//! and curated in a best-K population. Successful genomes feed pheromone and
//! trained weights back into the space.
//!
//! This crate is `no_std` (it needs `alloc`) and holds every algorithmic
//! piece. Dataset ingestion, the threaded coordinator/worker driver, replay
//! traces and the command line live in the `cants` crate.
//!
//! ```
//! use cants_core::colony::{Colony, ColonyConfig};
//!
//! let config = ColonyConfig { num_ants: 5, ..ColonyConfig::default() };
//! let mut colony = Colony::new(config, 2, 1).unwrap();
//! let candidate = colony.generate_candidate().unwrap();
//! assert!(candidate.genome.hidden_count() > 0);
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agent;
pub mod cell;
pub mod cluster;
pub mod colony;
pub mod genome;
pub mod pheromone;
pub mod rnn;
pub mod roulette;

mod math;

pub use agent::{AgentParam, AgentPath, CantAgent, Waypoint};
pub use cell::CellType;
pub use cluster::{condense_paths, dbscan, ClusterResult, Condensed, Label};
pub use colony::{Colony, ColonyConfig, ColonyError, FitnessReport, Population};
pub use genome::{InitScheme, RnnGenome};
pub use pheromone::{PheromoneConfig, PheromonePoint, PheromoneSpace, PointId};
pub use rnn::{Sequence, TrainConfig, TrainReport};
