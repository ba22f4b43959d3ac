//! Coil-current calibration.
//!
//! The gradient and offset field are modeled as linear functions of the two
//! Helmholtz coil currents,
//!
//!   g(I₁, I₂)  = a₀ + a₁I₁ + a₂I₂
//!   B₀(I₁, I₂) = b₀ + b₁I₁ + b₂I₂.
//!
//! Given measurements at known currents the coefficients are fit by least
//! squares (exactly, when the count matches the parameter count), and the
//! currents that null the gradient at a requested offset field follow from
//! a 2x2 solve. `closed_loop_calibrate` automates the extrapolate-measure
//! loop against a caller-supplied measurement function.

use crate::constants::ZEEMAN_PHASE_RATE;
use crate::error::{Error, Result};
use crate::linalg::{solve2, solve3};
use crate::spin::FieldModel;

/// Linear coil response model.
#[derive(Debug, Clone, Copy)]
pub struct CoilModel {
    /// Ambient gradient with no coil current, T/m.
    pub gradient_ambient: f64,
    /// Gradient per ampere in each coil, T/m/A.
    pub gradient_per_amp: (f64, f64),
    /// Ambient field, T.
    pub field_ambient: f64,
    /// Field per ampere in each coil, T/A.
    pub field_per_amp: (f64, f64),
}

impl CoilModel {
    pub fn new(
        gradient_ambient: f64,
        gradient_per_amp: (f64, f64),
        field_ambient: f64,
        field_per_amp: (f64, f64),
    ) -> Result<Self> {
        let model = Self {
            gradient_ambient,
            gradient_per_amp,
            field_ambient,
            field_per_amp,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let (a1, a2) = self.gradient_per_amp;
        let (b1, b2) = self.field_per_amp;
        if a1 == 0.0 && a2 == 0.0 {
            return Err(Error::invalid(
                "coil model",
                "gradient coefficients are both zero",
            ));
        }
        let det = a1 * b2 - a2 * b1;
        let scale = a1.abs().max(a2.abs()) * b1.abs().max(b2.abs());
        if det.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::invalid(
                "coil model",
                "gradient and field coefficient vectors are parallel; the current system is unsolvable",
            ));
        }
        Ok(())
    }

    /// Gradient at the given currents, T/m.
    pub fn gradient_at(&self, i1: f64, i2: f64) -> f64 {
        self.gradient_ambient + self.gradient_per_amp.0 * i1 + self.gradient_per_amp.1 * i2
    }

    /// Offset field at the given currents, T.
    pub fn field_at(&self, i1: f64, i2: f64) -> f64 {
        self.field_ambient + self.field_per_amp.0 * i1 + self.field_per_amp.1 * i2
    }

    /// The field model an ion at these currents experiences.
    pub fn field_model(&self, i1: f64, i2: f64) -> Result<FieldModel> {
        FieldModel::new(self.field_at(i1, i2), self.gradient_at(i1, i2))
    }
}

/// One calibration data point: currents, measured gradient with its
/// uncertainty, measured offset field.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationMeasurement {
    pub i1: f64,
    pub i2: f64,
    /// Measured gradient, T/m.
    pub gradient: f64,
    /// One-sigma gradient uncertainty, T/m.
    pub gradient_sigma: f64,
    /// Measured offset field, T.
    pub b0: f64,
}

impl CalibrationMeasurement {
    pub fn new(i1: f64, i2: f64, gradient: f64, gradient_sigma: f64, b0: f64) -> Result<Self> {
        if i1 < 0.0 || i2 < 0.0 {
            return Err(Error::invalid(
                "calibration measurement",
                format!("currents ({i1}, {i2}) A must be non-negative"),
            ));
        }
        if gradient_sigma <= 0.0 || gradient_sigma.is_nan() {
            return Err(Error::invalid(
                "calibration measurement",
                "gradient uncertainty must be positive",
            ));
        }
        Ok(Self {
            i1,
            i2,
            gradient,
            gradient_sigma,
            b0,
        })
    }
}

/// Fit the coil model from measurements.
///
/// With `assume_no_ambient` the ambient terms are pinned to zero and two
/// measurements with independent current vectors suffice; otherwise three
/// are needed. Gradient equations are weighted by 1/σ²; field equations are
/// unweighted (no field uncertainty is recorded). When the measurement
/// count equals the parameter count the fit is an exact solve.
pub fn fit_coil_model(
    measurements: &[CalibrationMeasurement],
    assume_no_ambient: bool,
) -> Result<CoilModel> {
    let needed = if assume_no_ambient { 2 } else { 3 };
    if measurements.len() < needed {
        return Err(Error::RankDeficient {
            why: format!(
                "{} measurements; fitting {} coefficients needs at least {}",
                measurements.len(),
                needed,
                needed
            ),
        });
    }

    if assume_no_ambient {
        let mut ata = [[0.0f64; 2]; 2];
        let mut atg = [0.0f64; 2];
        let mut atf_mat = [[0.0f64; 2]; 2];
        let mut atf = [0.0f64; 2];
        for m in measurements {
            let w = 1.0 / (m.gradient_sigma * m.gradient_sigma);
            let row = [m.i1, m.i2];
            for i in 0..2 {
                for j in 0..2 {
                    ata[i][j] += w * row[i] * row[j];
                    atf_mat[i][j] += row[i] * row[j];
                }
                atg[i] += w * row[i] * m.gradient;
                atf[i] += row[i] * m.b0;
            }
        }
        let Some((a, _)) = solve2(ata, atg) else {
            return Err(Error::RankDeficient {
                why: "current vectors are linearly dependent".into(),
            });
        };
        let Some((b, _)) = solve2(atf_mat, atf) else {
            return Err(Error::RankDeficient {
                why: "current vectors are linearly dependent".into(),
            });
        };
        CoilModel::new(0.0, (a[0], a[1]), 0.0, (b[0], b[1]))
    } else {
        let mut ata = [[0.0f64; 3]; 3];
        let mut atg = [0.0f64; 3];
        let mut atf_mat = [[0.0f64; 3]; 3];
        let mut atf = [0.0f64; 3];
        for m in measurements {
            let w = 1.0 / (m.gradient_sigma * m.gradient_sigma);
            let row = [1.0, m.i1, m.i2];
            for i in 0..3 {
                for j in 0..3 {
                    ata[i][j] += w * row[i] * row[j];
                    atf_mat[i][j] += row[i] * row[j];
                }
                atg[i] += w * row[i] * m.gradient;
                atf[i] += row[i] * m.b0;
            }
        }
        let Some((a, _)) = solve3(ata, atg) else {
            return Err(Error::RankDeficient {
                why: "current vectors are linearly dependent".into(),
            });
        };
        let Some((b, _)) = solve3(atf_mat, atf) else {
            return Err(Error::RankDeficient {
                why: "current vectors are linearly dependent".into(),
            });
        };
        CoilModel::new(a[0], (a[1], a[2]), b[0], (b[1], b[2]))
    }
}

/// Currents that null the gradient while holding the requested offset field.
#[derive(Debug, Clone, Copy)]
pub struct ZeroGradientSolution {
    pub i1: f64,
    pub i2: f64,
    /// True when a solution current is negative (coil polarity must flip).
    pub polarity_warning: bool,
}

/// Solve a₀ + a₁I₁ + a₂I₂ = 0 and b₀ + b₁I₁ + b₂I₂ = target_b0.
pub fn solve_zero_gradient(model: &CoilModel, target_b0: f64) -> Result<ZeroGradientSolution> {
    model.validate()?;
    let a = [
        [model.gradient_per_amp.0, model.gradient_per_amp.1],
        [model.field_per_amp.0, model.field_per_amp.1],
    ];
    let rhs = [-model.gradient_ambient, target_b0 - model.field_ambient];
    let Some((x, _)) = solve2(a, rhs) else {
        return Err(Error::RankDeficient {
            why: "singular coil system".into(),
        });
    };
    if !x[0].is_finite() || !x[1].is_finite() {
        return Err(Error::invalid("zero-gradient solve", "non-finite currents"));
    }
    Ok(ZeroGradientSolution {
        i1: x[0],
        i2: x[1],
        polarity_warning: x[0] < 0.0 || x[1] < 0.0,
    })
}

/// One pass of the closed calibration loop.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationStep {
    pub iteration: usize,
    pub i1: f64,
    pub i2: f64,
    /// Measured gradient at these currents, T/m.
    pub gradient: f64,
    /// Measurement uncertainty, T/m.
    pub sigma: f64,
}

/// Result of `closed_loop_calibrate`.
#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub i1: f64,
    pub i2: f64,
    pub iterations: usize,
    pub history: Vec<CalibrationStep>,
}

/// A measurement callback: currents in, (gradient, sigma, measured B0) out.
pub type GradientExperiment<'a> = dyn FnMut(f64, f64) -> Result<(f64, f64, f64)> + 'a;

/// Iterate fit → solve → re-measure until the measured gradient magnitude
/// drops below `tolerance` (T/m), or `max_iter` passes run out.
pub fn closed_loop_calibrate(
    experiment: &mut GradientExperiment,
    initial: &[CalibrationMeasurement],
    target_b0: f64,
    tolerance: f64,
    max_iter: usize,
    assume_no_ambient: bool,
) -> Result<CalibrationOutcome> {
    if tolerance <= 0.0 || tolerance.is_nan() {
        return Err(Error::invalid("calibration", "tolerance must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("calibration", "max_iter must be at least 1"));
    }
    let mut measurements = initial.to_vec();
    let mut history: Vec<CalibrationStep> = Vec::new();
    let mut best: Option<CalibrationStep> = None;
    for iteration in 1..=max_iter {
        // Double the gradient sigma per age step so the fit localizes around
        // the newest operating point; old points keep the system full rank
        // but stop dragging the linear model when the true response bends.
        let aged: Vec<CalibrationMeasurement> = measurements
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let age = (measurements.len() - 1 - j).min(20) as i32;
                CalibrationMeasurement {
                    gradient_sigma: m.gradient_sigma * 2f64.powi(age),
                    ..*m
                }
            })
            .collect();
        let model = fit_coil_model(&aged, assume_no_ambient)?;
        let sol = solve_zero_gradient(&model, target_b0)?;
        let (gradient, sigma, b_meas) = experiment(sol.i1, sol.i2)?;
        let step = CalibrationStep {
            iteration,
            i1: sol.i1,
            i2: sol.i2,
            gradient,
            sigma,
        };
        history.push(step);
        if best.is_none_or(|b| gradient.abs() < b.gradient.abs()) {
            best = Some(step);
        }
        if gradient.abs() <= tolerance {
            return Ok(CalibrationOutcome {
                i1: sol.i1,
                i2: sol.i2,
                iterations: iteration,
                history,
            });
        }
        measurements.push(CalibrationMeasurement::new(
            sol.i1, sol.i2, gradient, sigma, b_meas,
        )?);
    }
    let best = best.unwrap();
    Err(Error::CalibrationDidNotConverge {
        iterations: max_iter,
        best_gradient: best.gradient,
        tolerance,
        best_currents: (best.i1, best.i2),
    })
}

/// What the separation length in `coherence_estimate` refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherenceMode {
    /// A single transported ion; the length is the transport distance.
    SingleIon,
    /// Two ions in a decoherence-free pair; the length is their separation.
    DfsPair,
}

/// Time to accumulate one radian of differential phase across `separation`
/// in the given residual gradient, s. Zero gradient returns +infinity.
pub fn coherence_estimate(gradient: f64, separation: f64, _mode: CoherenceMode) -> Result<f64> {
    if gradient < 0.0 {
        return Err(Error::invalid("coherence estimate", "negative gradient"));
    }
    if separation <= 0.0 || separation.is_nan() {
        return Err(Error::invalid(
            "coherence estimate",
            "separation must be positive",
        ));
    }
    if gradient == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (ZEEMAN_PHASE_RATE * gradient * separation))
}
