//! Built-in targets: a four-mode Gaussian mixture, Bayesian logistic
//! regression and the two-binomial litter model.

mod covtype;
mod gauss_mix;
mod litter;
mod logistic;

use nalgebra::DVector;

pub use covtype::{filtered_row_count, load_covtype, CovtypeOptions, COVTYPE_COLUMNS};
pub use gauss_mix::GaussMixTarget;
pub use litter::{embedded_litter_data, LitterCell, LitterTarget, LITTER_TOTAL};
pub use logistic::{synthetic_logistic, Dataset, LogisticTarget, SyntheticLogistic};

pub(crate) fn all_finite(x: &DVector<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}
