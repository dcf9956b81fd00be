//! Spectrally resolved model of a multi-span amplified link: the ground
//! truth the digital twin is trained against and verified on.

mod edfa;
mod link;
mod spectrum;

pub use edfa::{amplify, edfa_gain_db, EdfaParams, INVERSION_MAX, INVERSION_MIN};
pub use link::{
    apply_span, calibrate_link, propagate, CalibrationReport, GffState, LinkConfig, Propagation,
    RIPPLE_WARNING_DB,
};
pub use spectrum::SpectrumState;
