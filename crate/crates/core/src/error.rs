use thiserror::Error;

pub type Result<T> = std::result::Result<T, PlannerError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("placement budget exhausted: placed {placed} of {count} users after {attempts} attempts")]
    PlacementBudgetExhausted {
        count: usize,
        placed: usize,
        attempts: u64,
    },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("user {user} is not assigned to UAV {uav} on subcarrier {subcarrier}")]
    UnassignedLink {
        user: usize,
        uav: usize,
        subcarrier: usize,
    },

    #[error("user {user} has no HAPS-RIS assignment on subcarrier {subcarrier}")]
    UnassignedUser { user: usize, subcarrier: usize },

    #[error("insufficient RIS elements: {elements} elements for {users} users")]
    InsufficientElements { elements: u64, users: usize },

    #[error("empty UAV zone: cannot place {k} UAVs over zero users")]
    EmptyZone { k: usize },

    #[error("invalid cluster count {k} for {points} points")]
    InvalidClusterCount { k: usize, points: usize },

    #[error("path-loss upper bound requires alpha = 2 (got {0})")]
    InvalidAlpha(f64),

    #[error("user {user} would receive zero subcarriers")]
    NoSubcarriersForUser { user: usize },

    #[error("full coverage not achievable with at most {m_max} RIS elements")]
    NotAchievable { m_max: u64 },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{0}")]
    Io(String),
}

impl PlannerError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        PlannerError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for PlannerError {
    fn from(e: std::io::Error) -> Self {
        PlannerError::Io(e.to_string())
    }
}
