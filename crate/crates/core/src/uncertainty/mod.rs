//! Structured per-mode coefficient uncertainty, the unstructured output
//! weight, and the composed uncertain plant.

pub mod coeff;
pub mod plant;
pub mod unstructured;
pub mod weights;

pub use coeff::{
    perturbed_mode_tf, relative_radii, CoefKind, ModeDelta, ModePairStats, UncertainCoefficient,
};
pub use plant::{
    assemble_uncertain_plant, ChannelId, DeltaSample, Envelope, UncertainPlant,
    UncertaintyOptions, Variant,
};
pub use unstructured::{
    envelope_over_set, fit_unstructured_weight, relative_error, UnstructuredWeight,
};
pub use weights::{lft_mode_tf, structured_weights, StructuredWeightSet};
