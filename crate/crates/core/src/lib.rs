//! Bayesian grouped fixed-effects estimation for linear panel data.
//!
//! Units are clustered into latent groups under a Dirichlet-process prior
//! that can be tilted toward or away from particular pairings by soft
//! pairwise constraints. Posterior inference uses a blocked Gibbs sampler
//! with slice variables, so the number of groups is never truncated.

pub mod constraints;
pub mod dgp;
pub mod dp_prior;
pub mod error;
pub mod forecast;
pub mod gibbs;
pub mod io;
pub mod linalg;
pub mod mdd;
pub mod montecarlo;
pub mod panel;
pub mod partition;
pub mod partition_point;
pub mod rng;
pub mod spc_kmeans;

pub use constraints::{ConstraintSet, LinkType, PairwiseConstraint};
pub use dp_prior::{DpHyper, StickWeights};
pub use error::{Error, Result};
pub use gibbs::{ChainSettings, PartitionMode, PosteriorChain};
pub use panel::{ModelConfig, PanelDataset};
pub use partition::GroupPartition;
