use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("polynomial input must be nonconstant")]
    ConstantInput,
    #[error("modulus {0} exceeds the supported table size")]
    ModulusTooLarge(u64),
    #[error("density of coprime values is zero at modulus {0}")]
    ZeroDensity(u64),
    #[error("f(p^{exponent}) is not defined beyond V = {v_max}")]
    BeyondVUndefined { exponent: u32, v_max: usize },
    #[error("R_k(q) is empty for q = {q}, k = {k}")]
    EmptyRk { q: u64, k: usize },
    #[error("polynomial vanishes identically modulo {0}")]
    PolyVanishesModEll(u64),
    #[error("derivative vanishes identically modulo {0}")]
    DerivativeVanishes(u64),
    #[error("polynomial is of the excluded form c*G^ord(chi) modulo {0}")]
    ExcludedForm(u64),
    #[error("precondition on the exponent failed: e = {e}, t = {t}")]
    PreconditionETooSmall { e: u32, t: u32 },
    #[error("polynomial is squarefull")]
    SquarefullF,
    #[error("polynomials are multiplicatively dependent")]
    MultDependent,
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("regime {regime} does not match N = {n}, K*D = {kd}")]
    RegimeMismatch { regime: String, n: usize, kd: usize },
    #[error("modulus {0} is not admissible for this family")]
    NotAdmissible(u64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable identifier used in JSON reports and across the C boundary.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ConstantInput => "CONSTANT_INPUT",
            Error::ModulusTooLarge(_) => "MODULUS_TOO_LARGE",
            Error::ZeroDensity(_) => "ZERO_DENSITY",
            Error::BeyondVUndefined { .. } => "BEYOND_V_UNDEFINED",
            Error::EmptyRk { .. } => "EMPTY_RK",
            Error::PolyVanishesModEll(_) => "POLY_VANISHES_MOD_ELL",
            Error::DerivativeVanishes(_) => "DERIVATIVE_VANISHES",
            Error::ExcludedForm(_) => "EXCLUDED_FORM",
            Error::PreconditionETooSmall { .. } => "PRECONDITION_E_TOO_SMALL",
            Error::SquarefullF => "SQUAREFULL_F",
            Error::MultDependent => "MULT_DEPENDENT",
            Error::BudgetExceeded(_) => "BUDGET_EXCEEDED",
            Error::RegimeMismatch { .. } => "REGIME_MISMATCH",
            Error::NotAdmissible(_) => "NOT_ADMISSIBLE",
            Error::Invalid(_) => "INVALID_INPUT",
        }
    }
}
