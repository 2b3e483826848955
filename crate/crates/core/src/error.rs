use crate::linalg3::Vec3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BebError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate section: {0}")]
    DegenerateSection(String),

    #[error("point is {residual:.3e} away from the section")]
    OffSection { residual: f64 },

    #[error("line Pi ∩ E^u is undefined when x_R = 0 (mu = 0)")]
    DegenerateLine,

    #[error("left excursion from {start:?} did not return to x = 0 within {bound} time units")]
    ExcursionEscape { start: Vec3, bound: f64 },

    #[error("no section crossing near {point:?} within one revolution")]
    SectionMissed { point: Vec3 },

    #[error("right-flow orbit of {point:?} enters the left half-space outside the excursion window")]
    UnassociatedExcursion { point: Vec3 },

    #[error("orbit escaped beyond |X| = {bound} at t = {time}")]
    Escape { time: f64, bound: f64 },

    #[error("no section point after t = {time} ({found} found)")]
    Stalled { time: f64, found: usize },

    #[error("step size underflow at t = {time} near state {state:?}")]
    StepUnderflow { time: f64, state: Vec3 },

    #[error("map evaluation failed at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<BebError>,
    },
}

impl BebError {
    pub fn at_iteration(self, iteration: usize) -> Self {
        BebError::AtIteration { iteration, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, BebError>;
