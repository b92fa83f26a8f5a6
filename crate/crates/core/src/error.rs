use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PadicError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("p = 2 is not supported")]
    EvenPrime,
    #[error("exponent must be at least 1")]
    ZeroExponent,
    #[error("precision must be at least 1")]
    ZeroPrecision,
    #[error("modulus {p}^{c} exceeds the build limit")]
    ModulusTooLarge { p: u64, c: u32 },
    #[error("no primitive root modulo {0}")]
    NoPrimitiveRoot(u64),
    #[error("{unit} is not a unit modulo {p}")]
    NotAUnit { unit: u64, p: u64 },
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("result would be known to fewer than {precision} p-adic digits")]
    PrecisionLoss { precision: u32 },
    #[error("mixed primes {0} and {1}")]
    PrimeMismatch(u64, u64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("character must have conductor at least p^{need}, got p^{got}")]
    ConductorTooSmall { need: u32, got: u32 },
    #[error("character is not primitive modulo {0}")]
    NotPrimitive(u64),
    #[error("character is odd")]
    Odd,
    #[error("no b satisfies chi(1 - pz) = e(bz/p)")]
    NoB,
    #[error("value at p has modulus {0}, expected 1")]
    NotUnitary(f64),
    #[error("shell {shell} does not vanish: |sum| = {size:e}")]
    ShellNotVanishing { shell: i64, size: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalError {
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("closed form for {cell} is only available at conductor exponent 2 (got {c})")]
    UnsupportedCell { cell: &'static str, c: u32 },
    #[error("shell {shell} above cutoff contributes {size:e}")]
    NonConvergentShell { shell: i64, size: f64 },
    #[error("principal series must have unramified chi1 and ramified chi2")]
    NotTwistMinimal,
    #[error("closed form {closed} and exhaustive search {exhaustive} disagree")]
    MethodsDisagree { closed: f64, exhaustive: f64 },
    #[error("p-adic window too small: refinement changed the value by {0:e}")]
    WindowTooSmall(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchError {
    #[error("quadrature did not converge: relative change {0:e}")]
    Quadrature(f64),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("need {required} coefficients, have {available}")]
    InsufficientCoefficients { required: usize, available: usize },
    #[error("point must lie in the upper half-plane")]
    NotInUpperHalfPlane,
    #[error("point is zero")]
    ZeroPoint,
    #[error(transparent)]
    Char(#[from] CharError),
    #[error("nebentypus is not primitive, certificate unavailable")]
    CertificateUnavailable,
    #[error("level {0} is not the square of an odd prime")]
    NotPrimeSquareLevel(u64),
    #[error("quadrature refinement disagrees by {0:.3e} relative")]
    Refinement(f64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported format version {0}")]
    Version(String),
    #[error("checksum mismatch: header {expected}, computed {actual}")]
    Checksum { expected: String, actual: String },
    #[error("validation blocked: {0}")]
    Blocked(String),
    #[error("http error: {0}")]
    Http(String),
    #[error("schema drift: {0}")]
    Schema(String),
    #[error("offline and not cached: {0}")]
    NotCached(String),
    #[error(transparent)]
    Char(#[from] CharError),
}
