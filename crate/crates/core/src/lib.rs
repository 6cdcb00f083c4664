pub mod adapt;
pub mod analysis;
pub mod container;
pub mod error;
pub mod fields;
pub mod gmres;
pub mod nn;
pub mod priors;
pub mod rng;
pub mod scatter;
pub mod special;

pub use error::{Error, Result};
pub use adapt::{AdaptConfig, AdaptOutcome, NetRegressor, Regressor, RoundRecord, SampleSet};
pub use analysis::experiment::RunConfig;
pub use analysis::{EfficiencyReport, ScalingFit};
pub use fields::{FieldGrid, Grid, SineCoeffs};
pub use nn::{NetConfig, NetWeights, TrainConfig};
pub use priors::{DiskSpec, FourierCoeffs, PriorConfig, PriorPoint};
pub use scatter::{ForwardModel, Measurement, ScatterConfig, C64};
