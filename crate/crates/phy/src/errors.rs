use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance {distance_m} m is below the reference distance {ref_distance_m} m")]
    DistanceBelowReference {
        distance_m: f64,
        ref_distance_m: f64,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("zero-forcing needs more transmit antennas: {antennas} available, {interfering_rows} interfering receive dimensions")]
    NullSpaceEmpty {
        antennas: usize,
        interfering_rows: usize,
    },
    #[error("harvest target {required_w} W exceeds the certified upper bound {bound_w} W")]
    Infeasible { required_w: f64, bound_w: f64 },
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
}

impl From<MetricError> for SolverError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::ShapeMismatch { context } => SolverError::ShapeMismatch { context },
        }
    }
}
