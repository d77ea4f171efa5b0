use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level-1 quotient graph is disconnected ({components} components)")]
    DisconnectedStructure { components: usize },
    #[error("symbol index {index} outside 1..={n_symbols}")]
    InvalidSymbolIndex { index: usize, n_symbols: usize },
    #[error("boundary index {index} outside 1..={boundary_size}")]
    InvalidBoundaryIndex { index: usize, boundary_size: usize },
    #[error("duplicate or self-referencing gluing rule {0}")]
    DuplicateGluing(String),
    #[error("boundary point {0} has no embedding into a level-1 cell")]
    MissingEmbedding(usize),
    #[error("invalid structure description: {0}")]
    InvalidStructure(String),
    #[error("level {level} needs {cells} cells, above the cap of {cap}")]
    LevelOverflow { level: usize, cells: u128, cap: usize },
    #[error("matrix is not symmetric (max deviation {0:e})")]
    AsymmetricInput(f64),
    #[error("expected data at level {expected}, got level {found}")]
    LevelMismatch { expected: usize, found: usize },
    #[error("interior block of the level-1 form is singular")]
    SingularInteriorBlock,
    #[error("traced form is not proportional to D (relative residual {0:e})")]
    NotProportional(f64),
    #[error("(D, r) is not a harmonic structure (relative residual {0:e})")]
    NotHarmonic(f64),
    #[error("weight r_{index} is not in (0, 1)")]
    NotRegular { index: usize },
    #[error("invalid boundary form: {0}")]
    InvalidBoundaryForm(String),
    #[error("missing value for vertex {vertex} at level {level}")]
    MissingVertexValue { level: usize, vertex: usize },
    #[error("requested level {requested} is below function level {function_level}")]
    LevelTooShallow { requested: usize, function_level: usize },
    #[error("dominant-measure coefficient {0} is not positive")]
    NonpositiveCoefficient(String),
    #[error("reference function g is constant")]
    ConstantReference,
    #[error("function is constant")]
    ConstantFunction,
    #[error("{0} exceeds the desk-scale cap")]
    UnsupportedScale(String),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("boundary point {0} is not the fixed point of any cell map")]
    NotAnchored(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DisconnectedStructure { .. } => "disconnected_structure",
            Error::InvalidSymbolIndex { .. } => "invalid_symbol_index",
            Error::InvalidBoundaryIndex { .. } => "invalid_boundary_index",
            Error::DuplicateGluing(_) => "duplicate_gluing",
            Error::MissingEmbedding(_) => "missing_embedding",
            Error::InvalidStructure(_) => "invalid_structure",
            Error::LevelOverflow { .. } => "level_overflow",
            Error::AsymmetricInput(_) => "asymmetric_input",
            Error::LevelMismatch { .. } => "level_mismatch",
            Error::SingularInteriorBlock => "singular_interior_block",
            Error::NotProportional(_) => "not_proportional",
            Error::NotHarmonic(_) => "not_harmonic",
            Error::NotRegular { .. } => "not_regular",
            Error::InvalidBoundaryForm(_) => "invalid_boundary_form",
            Error::MissingVertexValue { .. } => "missing_vertex_value",
            Error::LevelTooShallow { .. } => "level_too_shallow",
            Error::NonpositiveCoefficient(_) => "nonpositive_coefficient",
            Error::ConstantReference => "constant_reference",
            Error::ConstantFunction => "constant_function",
            Error::UnsupportedScale(_) => "unsupported_scale",
            Error::ParamOutOfRange(_) => "param_out_of_range",
            Error::NotAnchored(_) => "not_anchored",
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for errors caused by bad user input rather than a computation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::Config(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::InvalidSymbolIndex { .. }
                | Error::InvalidBoundaryIndex { .. }
                | Error::DuplicateGluing(_)
                | Error::MissingEmbedding(_)
                | Error::InvalidStructure(_)
                | Error::DisconnectedStructure { .. }
                | Error::LevelOverflow { .. }
                | Error::UnsupportedScale(_)
                | Error::ParamOutOfRange(_)
                | Error::AsymmetricInput(_)
                | Error::NonpositiveCoefficient(_)
                | Error::ConstantReference
                | Error::ConstantFunction
                | Error::NotAnchored(_)
                | Error::LevelTooShallow { .. }
                | Error::LevelMismatch { .. }
                | Error::MissingVertexValue { .. }
        )
    }
}
