use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("newton iteration did not converge in {iterations} iterations (last residual {residual:.3e})")]
    Newton { iterations: usize, residual: f64 },

    #[error("CFL condition violated for {what}: number {number:.3} > 1, reduce dt")]
    Cfl { what: &'static str, number: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("projection onto the admissible velocity set did not converge in {sweeps} sweeps (excess {excess:.3e})")]
    Projection { sweeps: usize, excess: f64 },

    #[error("picard iteration did not converge in {} iterations (residuals {residuals:?}); try a smaller dt", residuals.len())]
    Picard { residuals: Vec<f64> },

    #[error("initial data rejected: {0}")]
    InitialData(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Grid(_) | Error::Param(_) | Error::Config(_) | Error::InitialData(_) => 2,
            Error::Newton { .. }
            | Error::Cfl { .. }
            | Error::LinearSolve(_)
            | Error::Projection { .. }
            | Error::Picard { .. } => 3,
            Error::Invariant(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
