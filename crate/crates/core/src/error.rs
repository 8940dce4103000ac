use thiserror::Error;

/// Errors raised by constructors and checks across the crate.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OpError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("not a complex: d_{degree} ∘ d_{above} ≠ 0", above = .degree + 1)]
    NotAComplex { degree: i64 },
    #[error("arity {requested} exceeds the available bound {available}")]
    ArityOverflow { requested: usize, available: usize },
    #[error("inner Σ-module is not reduced: arity 0 is nonzero")]
    NotReduced,
    #[error("arity violation: {0}")]
    ArityViolation(String),
    #[error("antisymmetry fails on basis pair ({0}, {1})")]
    AntisymmetryFailure(usize, usize),
    #[error("Jacobi identity fails on basis triple ({0}, {1}, {2})")]
    JacobiFailure(usize, usize, usize),
    #[error("differential is not a derivation of the bracket on basis pair ({0}, {1})")]
    LeibnizFailure(usize, usize),
    #[error("algebra axiom fails: {0}")]
    AlgebraAxiom(String),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("not a twisting morphism: nonzero Maurer-Cartan residual in arity {arity}")]
    NotTwisting { arity: usize },
    #[error("algebra is over '{found}', expected '{expected}'")]
    NotAlgebraOverTarget { expected: String, found: String },
    #[error("algebra carries no quasi-free presentation")]
    NotQuasiFree,
    #[error("not equivariant: {0}")]
    NotEquivariant(String),
    #[error("parse error at {field}: {message}")]
    Parse { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, OpError>;

impl OpError {
    pub fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        OpError::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}
