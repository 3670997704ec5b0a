//! Simulation and rate computations for logistic branching populations,
//! their lookdown representation and the limiting Λ-coalescent genealogies.

pub mod coalescent;
pub mod genealogy;
pub mod lambda;
pub mod limit_lookdown;
pub mod lookdown;
pub mod offspring;
pub mod population;
pub mod quad;
pub mod rates;
pub mod regime;
pub mod seeding;
pub mod stats;

pub use coalescent::{Partition, PartitionPath};
pub use lambda::LambdaMeasure;
pub use offspring::OffspringLaw;
pub use regime::{Regime, RegimeConfig};
