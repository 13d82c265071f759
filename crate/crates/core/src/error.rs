use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    #[error("{function} overflows f64 at order {order}, x = {x:e}")]
    Overflow {
        function: &'static str,
        order: u32,
        x: f64,
    },

    #[error("Green's function singularity: source and receiver {distance:e} m apart")]
    Singularity { distance: f64 },

    #[error("scattering series did not converge up to order {max_order}")]
    Convergence { max_order: usize },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("empty grid: spacing {spacing} m leaves no point inside the region")]
    EmptyGrid { spacing: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
