//! Series and integral criteria for the almost-sure regime of the solution,
//! finiteness rulings and the resulting classification.

mod asymptotic;
mod classify;
mod decide;
mod sequences;
mod terms;

pub use classify::{
    classify, classify_with, default_eps_grid, geometric_grid, norm_equiv_check, trichotomy, ClassifyOptions,
    NormEquivReport, Regime, RegimeVerdict, Trichotomy,
};
pub use decide::{
    check_fading, decide_i, decide_s_prime, limit_lh, mean_square_equiv, FadingCheck, Finiteness, FinitenessRuling,
    IntegralCriterion, LimitLh, MeanSquareReport, SeriesCriterion, DEFAULT_INTEGRAL_WINDOWS, DEFAULT_SERIES_TERMS,
};
pub use sequences::{build_max_sequence, build_min_sequence, MaxCase, MaxSequence};
pub use terms::{
    integral_i, partial_sum_s, partial_sum_s_prime, row_intensities, rowwise_sum_s1, sum_general_grid, term_s,
    term_s_prime, PartialSum, TimeGrid,
};

pub use crate::special::mills_tail;
