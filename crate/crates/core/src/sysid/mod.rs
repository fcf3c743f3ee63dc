//! Identification of the temperature-scheduled melt-pool model: excitation
//! signal generation, dataset collection from the plant, and the binned
//! least-squares fit with linear interpolation over the scheduling
//! temperature.

pub mod dataset;
pub mod excitation;
pub mod fit;
pub mod model;

pub use dataset::{
    collect_dataset, dataset_to_csv, load_dataset, parse_dataset, save_dataset, LayerRecord,
    DATASET_SCHEMA,
};
pub use excitation::{generate_excitation, ExcitationSpec};
pub use fit::{fit_lpv, FitOptions};
pub use model::{
    predict_with, rmse, EvaluatedModel, LpvKnot, LpvModel, Mat2, Vec2, MODEL_SCHEMA,
};
