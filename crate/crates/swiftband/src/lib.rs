//! Hyperparameter search built around Hyperband-style successive halving,
//! with optional learning-curve performance predictors that terminate
//! unpromising trials early.
//!
//! The crate provides:
//!
//! * [`domain`] — search spaces, trials, learning curves and metric
//!   comparison;
//! * [`data`] — replayable learning-curve datasets, a synthetic generator
//!   and seeded trial drawing;
//! * [`predictor`] — end-of-round performance prediction: ε-SVR trained by
//!   a pairwise dual solver, plus a QUBO-encoded variant solved by
//!   simulated annealing;
//! * [`scheduler`] — bracket planning, classical successive halving, the
//!   predictor-assisted variants and a threshold-search baseline, all with
//!   exact epoch accounting;
//! * [`dist`] — a coordinator/worker runtime speaking length-prefixed JSON
//!   over TCP;
//! * [`experiment`] — paired multi-seed experiment runs with CSV/JSON
//!   reports and plot data.
//!
//! The guide in `book/` walks through every module with runnable snippets;
//! its code blocks compile as doc-tests of this crate.

pub mod data;
pub mod dist;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod predictor;
pub mod scheduler;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:expr) => {
            #[doc = include_str!($file)]
            #[allow(unused)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(datasets, "../../../book/src/datasets.md");
}
