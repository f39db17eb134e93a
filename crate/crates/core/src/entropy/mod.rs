//! Entropy functionals of a flow slice and their behaviour along a flow.

mod functionals;
mod variational;

pub use functionals::{
    expander_residual_rhs, f_functional, fisher_density, lambda, lambda_bar, nash_entropy, w_plus, LambdaResult, Nash,
    WPlus,
};
pub use variational::{mu_plus, nu_plus, MuPlus, NuPlus};
mod report;

pub use report::{
    asymptotics_report, check_w_plus_rate, entropy_report, soliton_defect_integral, AsymptoticsReport, DensitySource,
    EntropyReport, EntropyRow, EntropyVerdicts, SolitonDefectReport, RateCheck,
};
