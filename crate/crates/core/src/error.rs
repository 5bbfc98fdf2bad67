use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{which} vanishes at the evaluation point and does not define a plane field")]
    DegenerateForm { which: &'static str },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("monodromy must have determinant 1, got {det}")]
    NotOrientationPreserving { det: i64 },

    #[error("monodromy with trace {trace} is not Anosov")]
    NotAnosov { trace: i64 },

    #[error("integer overflow in monodromy arithmetic")]
    Overflow,

    #[error("homology class must be nonzero")]
    ZeroClass,

    #[error("propeller does not glue across z = 0 ~ z = 1: angular defect {defect:.3e} rad in {form}")]
    GluingMismatch { form: &'static str, defect: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("a(tau)·b(tau) = {product} >= 1: the flow box does not carry a bi-contact structure")]
    NotBiContact { product: f64 },

    #[error("bump profile violates its bounds: {0}")]
    BumpBounds(String),

    #[error("ker alpha = ker beta at {point:?} (margin {margin:.3e} below floor {floor:.1e}) at time {time}")]
    DegeneratePlane {
        point: [f64; 3],
        margin: f64,
        floor: f64,
        time: f64,
    },

    #[error("orbit did not return to the fibre z = 0 within {max_time} time units")]
    NoReturn { max_time: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
