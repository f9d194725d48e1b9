use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite coordinate in input: ({0}, {1})")]
    NonFinite(f64, f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not a hyperbolic toral automorphism: {0}")]
    NotAnosov(String),

    #[error("points are too far apart for a local bracket (distance {0})")]
    AmbiguousBranch(f64),

    #[error("no periodic point found: {0}")]
    NotFound(String),

    #[error("heteroclinic quadrilateral construction failed: {0}")]
    ConstructionFailed(String),

    #[error("bump trajectory escapes the plateau: |v| = {norm}, allowed < {limit}")]
    BumpEscape { norm: f64, limit: f64 },

    #[error("holonomy did not converge within {cap} compositions (last increment {last_increment:e})")]
    NoConvergence { cap: usize, last_increment: f64 },

    #[error("points are not on a common {kind} leaf (residual {residual:e})")]
    NotOnLeaf { kind: &'static str, residual: f64 },

    #[error("su-path is broken: {0}")]
    BrokenPath(String),

    #[error("bump supports overlap: {0}")]
    Overlap(String),

    #[error("iteration budget exceeded: |n| = {0}")]
    IterationBudget(i64),

    #[error("no regular value found after {0} draws")]
    RegularValueFailure(usize),

    #[error("postcondition failed: {0}")]
    PostconditionFailure(String),

    #[error("interval is outside the domain: {0}")]
    OutsideDomain(String),

    #[error("intervals overlap: {0}")]
    OverlappingIntervals(String),

    #[error("cover precondition cannot be verified: {0}")]
    CoverNotSatisfied(String),

    #[error("(s, t) search exhausted its refinement budget at grid {0}")]
    SearchExhausted(usize),

    #[error("shadowing check failed: {0}")]
    ShadowFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
