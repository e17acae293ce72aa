use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("field contains non-finite entries")]
    NonFinite,
    #[error("region exceeds the lattice domain")]
    RegionExceedsDomain,
    #[error("zero at ({x}, {y}) lies within 5 eps of the boundary")]
    ZeroTooCloseToBoundary { x: f64, y: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("energy increase: backtracking budget exhausted at iteration {iteration}")]
    EnergyIncrease { iteration: usize },
    #[error("|u| < 1/2 on the loop (min {min_modulus:.3})")]
    VorticityOnLoop { min_modulus: f64 },
    #[error("graph comes within 5 eps of the lateral boundary")]
    GraphTooCloseToBoundary,
    #[error("graph function violates its Lipschitz bound ({measured:.4} > {bound:.4})")]
    LipschitzViolation { measured: f64, bound: f64 },
    #[error("excess E1 = {e1:.3e} below the degenerate floor")]
    DegenerateExcess { e1: f64 },
    #[error("radius {radius} below the eps scale (minimum {min})")]
    RadiusBelowEpsilonScale { radius: f64, min: f64 },
    #[error("decay center has |u| = {modulus:.3} > 3/4")]
    CenterOutsideVorticity { modulus: f64 },
    #[error("slice {0} is not a good slice")]
    BadSlice(usize),
    #[error("frame is not aligned with the lattice axes")]
    UnsupportedFrame,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("incompatible Neumann data (defect {defect:.3e})")]
    IncompatibleData { defect: f64 },
    #[error("target pair vanishes on the mean-constraint annulus (min |u_h| {min_modulus:.3})")]
    SingularTarget { min_modulus: f64 },
    #[error("pair vanishes on the mean-constraint annulus (min |u| {min_modulus:.3})")]
    SingularPair { min_modulus: f64 },
    #[error("phase difference winds around the annulus")]
    DegreeMismatch,
    #[error("|u| or |u_h| below 3/4 in the phase-alignment region")]
    VorticityInRegion,
    #[error("covering failure: {0}")]
    CoveringFailure(String),
    #[error("mean on the outer annulus is {mean:.3e}, not zero")]
    MeanNotZero { mean: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },
    #[error("bad snapshot magic")]
    BadMagic,
    #[error("snapshot version {found} does not match supported version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("snapshot file is truncated")]
    TruncatedFile,
    #[error("audit failed: {0}")]
    AuditFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
