//! Point spectra of one-dimensional Sturm-Liouville operators `-u'' + V u`
//! on a finite interval with point interactions given by SL(2,R) matrices.
//!
//! Each interaction is parameterized by its Iwasawa factors
//! `A = P_alpha H_r E_theta`. Eigenvalues are detected by shooting the
//! projective class of the solution across the interval, and the library can
//! decide, for each parameter of each site, whether an eigenvalue survives
//! all values of that parameter or only the original one.

pub mod error;
pub mod exec;
pub mod problem;
pub mod random;
pub mod sl2;
pub mod spectra;
pub mod transfer;

pub use error::{Error, Result};
pub use exec::Execution;
pub use problem::{PointInteraction, Problem, ProblemSpec, Propagation, PruferTrace};
pub use sl2::{
    alpha_fixed_class, iwasawa_compose, iwasawa_decompose, proj_apply, proj_class,
    r_fixed_classes, theta_dichotomy, IwasawaParams, Mat2, ProjPoint,
};
pub use spectra::{
    classify_all, classify_dichotomy, eigen_test, eigenvalues_in_range, matching_gamma,
    DichotomyOptions, DichotomyVerdict, EigenReport, Parameter, SearchOptions, Verdict,
};
pub use transfer::{
    propagate_state, transfer, transfer_matrix, Potential, SolutionState, StepControl, Transfer,
};
