//! The DDF-based discrepancy between two surfaces and the Chamfer /
//! point-to-face baselines it generalizes.

mod baselines;
mod ddm;

pub use baselines::{chamfer, p2f, p2f_symmetric};
pub use ddm::{
    ddf_discrepancy, ddm, ddm_grad, ddm_grad_against, evaluate_fixed_field, MetricConfig, MetricGradient,
    MetricValue, Reduction,
};
