use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("block structure mismatch: {0}")]
    StructureMismatch(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid cone block: {0}")]
    InvalidBlock(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("line {line}: index out of range: {msg}")]
    OutOfRange { line: usize, msg: String },
    #[error("line {line}: duplicate entry (matrix {matno}, block {block}, {i}, {j})")]
    Duplicate {
        line: usize,
        matno: usize,
        block: usize,
        i: usize,
        j: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FaceError {
    #[error("point is outside the cone (violation {violation:e})")]
    NotInCone { violation: f64 },
    #[error("point is outside the dual face (violation {violation:e})")]
    NotInDualFace { violation: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("ambiguous outcome: reducing problem value {value:e} lies inside the tolerance band")]
    AmbiguousOutcome { value: f64 },
    #[error("primal problem is infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Face(#[from] FaceError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("layout mismatch: {0}")]
    Layout(String),
    #[error("extended dual was not solved to optimality: {0}")]
    NotOptimal(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
