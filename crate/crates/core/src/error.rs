//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A coordinate or time fell outside the range a table or waveform covers.
    #[error("{what} = {value} outside valid range [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A parameter or data structure violated one of its invariants.
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    /// The potential-energy derivative does not change sign inside the bracket.
    #[error("no potential minimum bracketed in [{lo_um} um, {hi_um} um]")]
    NoMinimum { lo_um: f64, hi_um: f64 },

    /// More than one local minimum inside the bracket; the caller must narrow it.
    #[error("{count} local minima detected in [{lo_um} um, {hi_um} um]; narrow the bracket")]
    MultipleMinima {
        count: usize,
        lo_um: f64,
        hi_um: f64,
    },

    /// Curvature at the candidate point is not positive.
    #[error(
        "stationary point at {x_um} um is not a minimum (curvature {curvature} V/m^2 per charge)"
    )]
    NotAMinimum { x_um: f64, curvature: f64 },

    /// The two finite-difference curvature estimates disagree beyond 1%.
    #[error("curvature finite differences did not converge: h and h/2 estimates differ by {rel:.3e} (limit 1e-2)")]
    CurvatureNotConverged { rel: f64 },

    /// A trajectory failed its round-trip consistency check.
    #[error("trajectory does not return to its start: |x(T) - x(0)| = {residual_um} um exceeds {tol_um} um")]
    NonReturning { residual_um: f64, tol_um: f64 },

    /// Fringe minimum and maximum coincide; the three-point signal is undefined.
    #[error("fringe contrast collapsed: |p(0) - p(pi)| = {delta:.3e} below 1e-6")]
    ContrastCollapse { delta: f64 },

    /// All three echo probabilities are pinned at 0 or 1, so the propagated
    /// phase variance degenerates to zero.
    #[error("degenerate phase variance: all three echo probabilities are 0 or 1")]
    DegenerateVariance,

    /// Least-squares design matrix is rank deficient.
    #[error("rank-deficient fit: {why}")]
    RankDeficient { why: String },

    /// Fringe fit returned zero contrast; the phase is undefined.
    #[error("degenerate fringe fit: contrast amplitude {a1:.3e} too small to define a phase")]
    DegenerateFringe { a1: f64 },

    /// Closed-loop calibration ran out of iterations.
    #[error("calibration did not converge in {iterations} iterations; best |gradient| = {best_gradient:.3e} T/m (target {tolerance:.3e})")]
    CalibrationDidNotConverge {
        iterations: usize,
        best_gradient: f64,
        tolerance: f64,
        best_currents: (f64, f64),
    },

    /// Configuration file missing, unparsable, or failing fail-fast validation.
    #[error("config error: {0}")]
    Config(String),

    /// Named scenario does not exist.
    #[error("unknown scenario '{0}' (expected one of: fig2-gradient-scan, fig3a-running-mean, fig3b-allan, calibrate, selftest)")]
    UnknownScenario(String),

    /// One or more self-test checks failed.
    #[error("selftest failed: {failed} of {total} checks did not pass")]
    SelftestFailed { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether this error is a configuration problem (CLI exit code 2) as
    /// opposed to a runtime/convergence failure (exit code 3).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnknownScenario(_) | Error::Invalid { .. }
        )
    }

    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            why: why.into(),
        }
    }
}
