use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("line {from}-{to}: self-loop")]
    SelfLoop { from: u32, to: u32 },

    #[error("duplicate line between buses {from} and {to}")]
    DuplicateLine { from: u32, to: u32 },

    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),

    #[error("line references unknown bus {0}")]
    UnknownBus(u32),

    #[error("bus {id}: {field} must be {requirement}, got {value}")]
    InvalidParameter {
        id: u32,
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("line {from}-{to}: susceptance must be positive, got {value}")]
    NonPositiveSusceptance { from: u32, to: u32, value: f64 },

    #[error("graph not connected ({components} components)")]
    Disconnected { components: usize },

    #[error("grid has no slow bus")]
    EmptySlowSet,

    #[error("matpower: missing table `{0}`")]
    MissingTable(&'static str),

    #[error("matpower: line {line}: {message}")]
    MatpowerSyntax { line: usize, message: String },

    #[error("matpower: branch {from}-{to}: zero reactance")]
    ZeroReactance { from: u32, to: u32 },

    #[error("unbalanced injections: sum p = {0:e}")]
    Unbalanced(f64),

    #[error("no fixed point: Newton stopped after {iterations} iterations at residual {residual:e}")]
    NoFixedPoint { iterations: usize, residual: f64 },

    #[error("singular Jacobian away from the uniform mode")]
    SingularJacobian,

    #[error("epsilon must be positive; use the reduced model for the limit")]
    EpsilonNotPositive,

    #[error("epsilon must be at most 1, got {0}")]
    EpsilonTooLarge(f64),

    #[error("fast block J_FF is not negative definite (eigenvalue {eigenvalue:e})")]
    IndefiniteFastBlock { eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate kernel: factor `{factor}` = {value:e}")]
    DegenerateKernel { factor: &'static str, value: f64 },

    #[error("analytic formula requires homogeneous parameters; use simulation ({0})")]
    Heterogeneous(String),

    #[error("zero eigenvalue of the reduced Jacobian is not simple (reduced network disconnected)")]
    ZeroModeNotSimple,

    #[error("matrix is not a symmetric Laplacian: {0}")]
    NotLaplacian(String),

    #[error("unstable system: eigenvalue with real part {0:e}")]
    Unstable(f64),

    #[error("Lyapunov solver did not converge")]
    LyapunovNoConvergence,

    #[error("implicit step matrix is singular (dt = {0})")]
    SingularStep(f64),

    #[error("Newton failed in implicit step at t = {t}: residual {residual:e}; try a smaller dt_max")]
    StepNewton { t: f64, residual: f64 },

    #[error("trajectory diverged at t = {0} (|x| beyond pi)")]
    Diverged(f64),

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("empty post-burn-in window")]
    EmptyWindow,

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the failure comes from bad input rather than from the numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Trajectory { source, .. } | Error::File { source, .. } => source.is_input_error(),
            Error::Schema { .. }
            | Error::SelfLoop { .. }
            | Error::DuplicateLine { .. }
            | Error::DuplicateBus(_)
            | Error::UnknownBus(_)
            | Error::InvalidParameter { .. }
            | Error::NonPositiveSusceptance { .. }
            | Error::Disconnected { .. }
            | Error::EmptySlowSet
            | Error::MissingTable(_)
            | Error::MatpowerSyntax { .. }
            | Error::ZeroReactance { .. }
            | Error::Unbalanced(_)
            | Error::EpsilonNotPositive
            | Error::EpsilonTooLarge(_)
            | Error::DimensionMismatch(_)
            | Error::Heterogeneous(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            _ => false,
        }
    }

    /// Process exit code: 2 for input errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_input_error() {
            2
        } else {
            3
        }
    }
}
