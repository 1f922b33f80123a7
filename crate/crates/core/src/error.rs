use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the reachability engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("set is empty")]
    EmptySet,
    #[error("set is unbounded")]
    Unbounded,
    #[error("linear program failed: {0}")]
    Solver(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("exact-star branch cap of {cap} exceeded")]
    BranchCap { cap: usize },
    #[error("enclosure refinement failed at t = {time} after {attempts} attempts; try a smaller step")]
    StepSize { time: f64, attempts: usize },
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("layer {layer}: {source}")]
    AtLayer {
        layer: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn at_layer(self, layer: usize) -> Self {
        match self {
            e @ Error::AtLayer { .. } => e,
            e => Error::AtLayer {
                layer,
                source: alloc::boxed::Box::new(e),
            },
        }
    }

    /// Strips any layer annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLayer { source, .. } => source.root(),
            e => e,
        }
    }
}
