use thiserror::Error;

use crate::magic::MagicClassReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("local dimension {0} is not supported (must be 2 or an odd prime)")]
    InvalidModulus(u32),

    #[error("number of sites must be at least 1")]
    NoSites,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid characteristic function: {0}")]
    InvalidCharFunction(String),

    #[error("generators are not pairwise commuting (symplectic product nonzero)")]
    NotIsotropic,

    #[error("generators are linearly dependent over Z_d")]
    DependentGenerators,

    #[error("phase {0} is not an admissible root of unity for this group")]
    InvalidPhase(String),

    #[error("support of the characteristic function is not a closed isotropic subgroup: {0}")]
    NotAGroup(String),

    #[error("no nontrivial parameters for d = {d}: no s, t outside {{0, 1}} satisfy s^2 + t^2 = 1 mod d")]
    NoNontrivialParams { d: u32 },

    #[error("invalid convolution parameters (s, t) = ({s}, {t}) for d = {d}")]
    InvalidParams { s: u32, t: u32, d: u32 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("dense path refused: dimension {dim} exceeds size cap {cap} (use the char-domain path or raise MAGICFLOW_SIZE_CAP)")]
    SizeCapExceeded { dim: usize, cap: usize },

    #[error("matrix is not unitary (max deviation {0:e})")]
    NonUnitary(f64),

    #[error("multiplier {a} is not invertible mod {d}")]
    NonInvertibleMultiplier { a: u32, d: u32 },

    #[error("site index {site} out of range for {n} sites")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("eigenvalue {0:e} below the PSD tolerance")]
    NegativeEigenvalue(f64),

    #[error("entropy ratio S / log d = {0} is not an integer")]
    NonIntegerEntropy(f64),

    #[error("symmetry count disagreement: symplectic path {fast}, dense path {dense}")]
    SymmetryPathDisagreement { fast: u64, dense: u64 },

    #[error("classification verdicts disagree: {}", .0.summary())]
    VerdictDisagreement(Box<MagicClassReport>),

    #[error("magic gap is zero; the iteration estimate is undefined")]
    ZeroMagicGap,

    #[error("class semantics are defined for pure states only (purity {0})")]
    MixedState(f64),

    #[error("three-copy qubit convolution is only defined for d = 2 (got d = {0})")]
    QubitOnly(u32),

    #[error("qubit char-domain convolution has not passed its dense equivalence check in this process")]
    OracleGateClosed,

    #[error("qubit char-domain convolution failed its dense equivalence check: {0}")]
    OracleGateFailed(String),

    #[error("iteration search did not terminate")]
    IterationSearch,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
