use thiserror::Error;

/// Why an edge length fell outside the domain of its potential family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    /// Length at or below the singularity floor (coincident agents).
    TooShort,
    /// Length at or beyond the connectivity radius `delta`.
    BeyondRadius,
    /// The evaluated value was NaN or infinite.
    NonFinite,
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainKind::TooShort => f.write_str("edge length below singularity floor"),
            DomainKind::BeyondRadius => f.write_str("edge length not below connectivity radius"),
            DomainKind::NonFinite => f.write_str("non-finite potential value"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge #{edge} ({i}, {j}): vertex {vertex} out of range 1..={n}")]
    VertexOutOfRange {
        edge: usize,
        i: usize,
        j: usize,
        vertex: usize,
        n: usize,
    },
    #[error("edge #{edge} ({vertex}, {vertex}) is a self-loop")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("edge #{edge} ({i}, {j}) duplicates edge #{first}")]
    DuplicateEdge {
        edge: usize,
        i: usize,
        j: usize,
        first: usize,
    },
    #[error("graph must have at least one vertex")]
    EmptyGraph,
    #[error("vertex {vertex} out of range 1..={n}")]
    InvalidVertex { vertex: usize, n: usize },

    #[error("unsupported ambient dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("position vector has length {got}, expected {expected}")]
    PositionLength { expected: usize, got: usize },
    #[error("signed-area terms require dimension 2, got {0}")]
    AreaRequiresPlanar(usize),
    #[error("{what} has {got} entries, expected {expected}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },
    #[error("triangle #{index} ({i}, {j}, {k}): {reason}")]
    InvalidTriangle {
        index: usize,
        i: usize,
        j: usize,
        k: usize,
        reason: &'static str,
    },

    #[error("domain violation on edge #{edge} ({i}, {j}) at length {length}: {kind}")]
    Domain {
        edge: usize,
        i: usize,
        j: usize,
        length: f64,
        kind: DomainKind,
    },
    #[error("closed form requires every edge to use the {0} family")]
    MixedFamilies(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("integration step {step}: {source}")]
    Integration {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("non-finite state at integration step {0}")]
    NonFiniteState(usize),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by a configuration leaving a potential's domain,
    /// including domain exits during integration.
    pub fn is_domain(&self) -> bool {
        match self {
            Error::Domain { .. } | Error::NonFiniteState(_) => true,
            Error::Integration { source, .. } => source.is_domain(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
