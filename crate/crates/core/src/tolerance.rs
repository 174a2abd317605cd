//! Tolerance classes used by every check.

/// Identities that hold exactly in dyadic arithmetic.
pub const EXACT: f64 = 1e-12;
/// Inequalities and sums that accumulate rounding.
pub const ACCUMULATION: f64 = 1e-9;
/// Fits and empirical constants.
pub const STATISTICAL: f64 = 0.05;
