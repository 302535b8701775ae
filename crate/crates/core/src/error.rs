use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("modulus {n} exceeds the supported limit {limit}")]
    ModulusTooLarge { n: u64, limit: u64 },
    #[error("residue {value} at position {index} is outside Z_{modulus}")]
    ResidueOutOfRange { index: usize, value: u64, modulus: u64 },
    #[error("expected {expected} residues, got {got}")]
    ResidueCount { expected: usize, got: usize },
    #[error("element {x} is outside Z_{n}")]
    ElementOutOfRange { x: u64, n: u64 },
    #[error("{r} does not divide {n}")]
    NotADivisor { r: u64, n: u64 },
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("entropy budget exceeded: {lhs:.6} > {limit:.6}")]
    BudgetExceeded { lhs: f64, limit: f64 },
    #[error("partial coloring search failed in iteration {iteration} after {attempts} attempts")]
    SearchFailed { iteration: usize, attempts: u32 },
    #[error("cell r = {r}: partial coloring search failed in iteration {iteration} after {attempts} attempts")]
    CellSearchFailed { r: u64, iteration: usize, attempts: u32 },
    #[error("n = {n} exceeds the solver limit {limit}")]
    LimitExceeded { n: u64, limit: u64 },
}
