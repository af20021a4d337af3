use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("infeasible geometry: start-to-end distance {distance:.3} m exceeds {budget:.3} m flight budget")]
    InfeasibleGeometry { distance: f64, budget: f64 },

    #[error("degenerate link geometry: transmitter and receiver are co-located")]
    DegenerateGeometry,

    #[error("constraint violated: {0}")]
    ConstraintViolation(Violation),

    #[error("initial trajectory is infeasible: {0}")]
    InfeasibleInit(String),

    #[error("trajectory subproblem infeasible: {0}")]
    SubproblemInfeasible(String),

    #[error(
        "enumeration budget exceeded: {services} services x 2 servers > {limit} binary variables"
    )]
    BudgetExceeded { services: usize, limit: usize },

    #[error("plot refused: {0}")]
    Plot(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
