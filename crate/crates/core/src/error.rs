use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("metric is degenerate at {point:?}")]
    DegenerateMetric { point: Vec<f64> },

    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("geodesic left the chart at t = {time}")]
    ChartExit { time: f64 },

    #[error("step size {step} is not usable")]
    StepUnderflow { step: f64 },

    #[error("vectors span a degenerate plane")]
    DegeneratePlane,

    #[error("vector is not vertical (base component {base_component})")]
    NotVertical { base_component: f64 },

    #[error("warp function is not positive at t = {t} (value {value})")]
    NonPositiveWarp { t: f64, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
