//! Random iterated function systems on small compact metric spaces.
//!
//! * [`symbolic`]: words, the shift, cylinders and Bernoulli sampling.
//! * [`spaces`]: circle, 2-sphere, unit interval and finite grids.
//! * [`ifs`]: map families and fiber-wise orbits.
//! * [`chains`]: relation chains, δ-chains and chain recurrence.
//! * [`stochastic`]: Monte Carlo estimates over random branches.

pub mod chains;
pub mod error;
pub mod ifs;
pub mod rng;
pub mod spaces;
pub mod stochastic;
pub mod symbolic;

pub use error::{Error, Result};
pub use stochastic::{BranchProperty, EstimationReport, TailBoundReport};
pub use chains::{ChainCertificate, ChainPoint, HitSet, RelationSpec, TargetSet};
pub use ifs::{make_north_south, IfsSystem, MapDescriptor, OrbitSegment};
pub use spaces::{Ball, BasisBall, EpsilonNet, Space, SpaceKind, SpacePoint};
pub use symbolic::{Cylinder, FiniteWord, ProbabilityVector, Symbol, WordStream};
