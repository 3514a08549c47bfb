//! Adaptive one-way GBH multiple testing under equicorrelated normal means.
//!
//! * [`normal`]: standard normal density, CDF, quantile and a tail bound.
//! * [`procedures`]: BH, GBH₁ (and its leave-one-out weights), Storey.
//! * [`bound`]: the closed-form FDR upper bound `B(λ, ρ, α)` and its pieces.
//! * [`simulator`]: reproducible Monte Carlo for empirical FDR and power.
//! * [`verify`]: quadrature and Monte Carlo audits of the derivation's lemmas.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod bound;
pub mod error;
pub mod normal;
pub mod procedures;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod verify;

pub use bound::{
    bound_curve, exact_p_conditional, fdr_bound, fdr_bound_aform, fdr_bound_aform_with, fdr_bound_with,
    integrals_closed, m_factor, p_lower, rho_max, AParam, BoundBreakdown, BoundInput, CurveRow, DomainCheck,
    Parameterization,
};
pub use error::{Error, Result};
pub use procedures::{
    bh_step_up, gbh1, gbh1_weights, gbh1_weights_loo, step_up_oracle, storey, GbhWeights, GroupedPValues,
    RejectionResult,
};
pub use simulator::{EffectSize, Procedure, SimConfig, SimSummary};
pub use verify::{Section, VerifyReport};
