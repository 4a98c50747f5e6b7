use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("not positive definite")]
    NotPositiveDefinite,
    #[error("not PSD (minimum eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("non-finite matrix entry")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("{0} required")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("{0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unservable split: ID {id} carries {bits} bits at zero rate")]
    UnservableSplit { id: usize, bits: f64 },
    #[error("local accuracy {0} outside (0, 1)")]
    AccuracyOutOfRange(f64),
    #[error("infeasible geometry: no placement after {attempts} attempts")]
    InfeasibleGeometry { attempts: u64 },
    #[error("degenerate scenario: {0}")]
    Degenerate(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite auxiliary variable in {0}")]
    NonFiniteAux(&'static str),
    #[error("infeasible subproblem: constraint {family} #{index} has value {value:e}")]
    InfeasibleStart {
        family: &'static str,
        index: usize,
        value: f64,
    },
    #[error("line search stalled after {halvings} halvings (newton decrement^2 = {decrement:e})")]
    LineSearchStalled { halvings: usize, decrement: f64 },
    #[error("Newton system could not be factored")]
    SingularNewtonSystem,
    #[error("SCA iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<SolverError>,
    },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed result row: {0}")]
    Row(String),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("oracle: {0}")]
    Oracle(String),
}
