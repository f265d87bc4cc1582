//! Command-line front end: experiment configs, dispatch and CSV output.

mod config;
mod run;
mod table;

pub use config::{
    normalize_config, parse_config, serialize_config, Amplitude, AngularSpreadParams, BeamsplitParams,
    BoundariesParams, ConfigError, DictionaryChoice, DofApertureParams, DofDistanceParams, EstimateParams,
    EstimatorChoice, ExperimentConfig, ExperimentKind, GainMapParams, Orientation, Parameters, PositioningParams,
    PowerProfileParams, ScattererSpec, SourceSpec, WeightsChoice,
};
pub use run::{run_experiment, summary_path, write_output, ExperimentOutput, RunError};
pub use table::{format_float, Cell, ResultTable};

/// Exit code of a failed self-check.
pub const EXIT_ACCEPTANCE_FAILURE: i32 = 3;
