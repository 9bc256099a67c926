use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised anywhere in the model pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("masked softmax: row {row} has no unmasked entries")]
    DegenerateRow { row: usize },
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("invalid labels: {0}")]
    Label(String),
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("training diverged at epoch {epoch}: {component} is not finite")]
    Divergence { epoch: usize, component: &'static str },
    #[error("configuration mismatch: {0}")]
    Config(String),
    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape_err<T>(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Result<T> {
    Err(Error::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    })
}
