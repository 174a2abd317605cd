//! Wasserstein α-numbers, Δ-numbers, stopping-time trees and square
//! functions for finite measures on the unit interval.

pub mod alpha;
pub mod dyadic;
pub mod error;
pub mod measure;
mod numeric;
pub mod squarefn;
pub mod tolerance;
pub mod transport;
pub mod tree;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use measure::{
    cdf_difference, generate, phi_mass, Atom, CdfDifference, Interval, Measure, MeasureSpec,
    PiecewiseLinearFn, Piece,
};
pub use transport::{w1_oracle, w1_supported, w1_supported_with_witness, w1_unrestricted, W1Result};
pub use alpha::{
    alpha, alpha_smooth, alpha_smooth_detail, epsilon_for_doubling, select_ball,
    smooth_bounds_check, stability_check, AlphaTable, Ball, BallChoice, SmoothAlpha,
};
pub use dyadic::{
    delta, doubling_constant, navigate, shifted_systems, tail_tip, ChainLength, DoublingReport,
    DyadicInterval, DyadicSystem, Step, TailTip,
};
pub use tree::{
    adapted_measure, carleson_comparison, stopping_forest, tree_doubling_check, Forest, Member,
    MemberKind, StopMode, Tree,
};
pub use squarefn::{
    buckley_ratio, carleson_sum, continuous_square_profile, cz_decompose, domination_check,
    dyadic_square_profile, martingale_diff, sample_points, tolsa_l2, Coefficient,
    CzDecomposition, DensityHistogram, DominationCheck, MartingaleTable, SquareFunctionProfile,
};
