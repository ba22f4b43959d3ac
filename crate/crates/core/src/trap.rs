//! Axial trap potential, transport waveform, ion trajectory.
//!
//! The axial potential is the voltage-weighted superposition of two segment
//! shape factors, V(x) = V₁ũ₁(x) + V₂ũ₂(x). A positive ion in negative
//! segment voltages sits at the minimum of its potential energy qV(x); as
//! the neighbor-segment voltage follows a half-sine pulse the minimum is
//! displaced and returns, and the ion follows it adiabatically. The
//! geometric quantity that converts a field gradient into spin phase is the
//! displacement-time integral ∫[x(t) − x(0)]dt over the pulse.

use crate::error::{Error, Result};
use crate::shape::ShapeFactorTable;

/// Absolute position tolerance of the minimizer, m (10⁻⁴ um).
pub const MINIMIZER_TOL: f64 = 1e-10;

/// Finite-difference step for curvature, m (0.1 um).
pub const CURVATURE_STEP: f64 = 1e-7;

/// Interior points of the derivative sign scan in `find_minimum`.
const SCAN_POINTS: usize = 256;

/// Transport counts as adiabatic when duration x axial frequency is at
/// least this ratio; below it `transport_summary` raises a warning flag.
pub const ADIABATIC_WARN_RATIO: f64 = 100.0;

/// Shape of the neighbor-segment voltage pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WaveformKind {
    /// V₂(t) = V₂ₚₑₐₖ·sin(πt/T): zero at both ends, peak at T/2.
    #[default]
    SineReturn,
}

/// A single out-and-back transport pulse.
#[derive(Debug, Clone, Copy)]
pub struct TransportScenario {
    /// Static voltage on the main trapping segment, V.
    pub v1: f64,
    /// Peak voltage on the neighboring segment, V.
    pub v2_peak: f64,
    /// Pulse duration, s.
    pub duration: f64,
    pub waveform: WaveformKind,
    /// Number of time steps (the trajectory has `samples + 1` points).
    pub samples: usize,
}

impl TransportScenario {
    pub fn validate(&self) -> Result<()> {
        if self.duration <= 0.0 || self.duration.is_nan() {
            return Err(Error::invalid("transport scenario", "duration must be > 0"));
        }
        if self.samples < 64 {
            return Err(Error::invalid(
                "transport scenario",
                format!("need at least 64 time samples, got {}", self.samples),
            ));
        }
        if !self.v1.is_finite() || !self.v2_peak.is_finite() {
            return Err(Error::invalid("transport scenario", "non-finite voltage"));
        }
        Ok(())
    }
}

/// Ion position versus time over one transport pulse.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    positions: Vec<f64>,
}

impl Trajectory {
    /// Build from explicit samples (times strictly increasing, same length).
    pub fn from_samples(times: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(Error::invalid(
                "trajectory",
                format!("{} times vs {} positions", times.len(), positions.len()),
            ));
        }
        if times.len() < 2 {
            return Err(Error::invalid("trajectory", "need at least 2 samples"));
        }
        if times
            .windows(2)
            .any(|w| w[1] <= w[0] || (w[1] - w[0]).is_nan())
        {
            return Err(Error::invalid(
                "trajectory",
                "times not strictly increasing",
            ));
        }
        Ok(Self { times, positions })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn start_position(&self) -> f64 {
        self.positions[0]
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// max |x(t) − x(0)| over the sampled trajectory, m.
    pub fn max_displacement(&self) -> f64 {
        let x0 = self.positions[0];
        self.positions
            .iter()
            .map(|x| (x - x0).abs())
            .fold(0.0, f64::max)
    }
}

/// V₂(t) for the scenario waveform. Endpoints are exactly zero.
pub fn waveform_voltage(t: f64, scenario: &TransportScenario) -> Result<f64> {
    let big_t = scenario.duration;
    if t < 0.0 || t > big_t {
        return Err(Error::OutOfDomain {
            what: "waveform time (s)",
            value: t,
            lo: 0.0,
            hi: big_t,
        });
    }
    match scenario.waveform {
        WaveformKind::SineReturn => {
            if t == 0.0 || t == big_t {
                return Ok(0.0);
            }
            Ok(scenario.v2_peak * (std::f64::consts::PI * t / big_t).sin())
        }
    }
}

/// Total axial potential V₁ũ₁(x) + V₂ũ₂(x), in volts.
pub fn potential_at(x: f64, v1: f64, v2: f64, table: &ShapeFactorTable) -> Result<f64> {
    if table.segment_count() < 2 {
        return Err(Error::invalid(
            "shape table",
            "transport model needs two segments",
        ));
    }
    Ok(v1 * table.value(0, x)? + v2 * table.value(1, x)?)
}

/// d/dx of the total potential, V/m.
fn potential_deriv(x: f64, v1: f64, v2: f64, table: &ShapeFactorTable) -> Result<f64> {
    Ok(v1 * table.deriv(0, x)? + v2 * table.deriv(1, x)?)
}

/// Locate the potential-energy minimum for a positive charge inside `bracket`.
///
/// The derivative is scanned on an interior grid first: exactly one
/// negative-to-positive sign change must be present, otherwise the bracket
/// holds no minimum or more than one and an error is returned. The sign
/// change is then refined by bisection to `MINIMIZER_TOL`.
pub fn find_minimum(
    v1: f64,
    v2: f64,
    table: &ShapeFactorTable,
    bracket: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = bracket;
    if hi <= lo || (hi - lo).is_nan() {
        return Err(Error::invalid("bracket", format!("[{lo}, {hi}] is empty")));
    }
    table.check_domain(lo)?;
    table.check_domain(hi)?;

    let n = SCAN_POINTS;
    let d_at = |x: f64| potential_deriv(x, v1, v2, table);
    let mut transitions: Vec<(f64, f64)> = Vec::new();
    let mut prev_x = lo;
    let mut prev_d = d_at(lo)?;
    for k in 1..=n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        let d = d_at(x)?;
        if prev_d < 0.0 && d >= 0.0 {
            transitions.push((prev_x, x));
        }
        prev_x = x;
        prev_d = d;
    }
    match transitions.len() {
        0 => Err(Error::NoMinimum {
            lo_um: lo * 1e6,
            hi_um: hi * 1e6,
        }),
        1 => bisect_derivative(&d_at, transitions[0].0, transitions[0].1),
        count => Err(Error::MultipleMinima {
            count,
            lo_um: lo * 1e6,
            hi_um: hi * 1e6,
        }),
    }
}

/// Bisection on a derivative sign change; `d(a) < 0 <= d(b)` on entry.
fn bisect_derivative(d_at: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    while b - a > 0.5 * MINIMIZER_TOL {
        let mid = 0.5 * (a + b);
        if d_at(mid)? < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Grow a derivative sign bracket outward from a seed position.
///
/// Walks downhill in potential energy from `seed` with doubling steps until
/// the derivative changes sign, which tracks the local minimum the ion
/// already occupies without ever looking at distant wells.
fn bracket_from_seed(
    v1: f64,
    v2: f64,
    table: &ShapeFactorTable,
    seed: f64,
    initial_step: f64,
) -> Result<(f64, f64)> {
    let (dom_lo, dom_hi) = table.domain();
    let d0 = potential_deriv(seed, v1, v2, table)?;
    if d0 == 0.0 {
        // Seed is already stationary; a tight symmetric bracket suffices.
        let lo = (seed - initial_step).max(dom_lo);
        let hi = (seed + initial_step).min(dom_hi);
        return Ok((lo, hi));
    }
    let downhill_right = d0 < 0.0;
    let mut near = seed;
    let mut step = initial_step;
    loop {
        let far = if downhill_right {
            (near + step).min(dom_hi)
        } else {
            (near - step).max(dom_lo)
        };
        let d = potential_deriv(far, v1, v2, table)?;
        let flipped = if downhill_right { d >= 0.0 } else { d <= 0.0 };
        if flipped {
            return if downhill_right {
                Ok((near, far))
            } else {
                Ok((far, near))
            };
        }
        if far == dom_lo || far == dom_hi {
            return Err(Error::NoMinimum {
                lo_um: dom_lo * 1e6,
                hi_um: dom_hi * 1e6,
            });
        }
        near = far;
        step *= 2.0;
    }
}

/// Refine a minimum from a seed position by outward bracketing + bisection.
pub fn find_minimum_near(
    v1: f64,
    v2: f64,
    table: &ShapeFactorTable,
    seed: f64,
    initial_step: f64,
) -> Result<f64> {
    let (a, b) = bracket_from_seed(v1, v2, table, seed, initial_step)?;
    let d_at = |x: f64| potential_deriv(x, v1, v2, table);
    // After the outward walk d(a) may be exactly 0 (seed was stationary).
    if d_at(a)? >= 0.0 {
        return Ok(a);
    }
    bisect_derivative(&d_at, a, b)
}

/// Axial secular frequency (Hz, i.e. ω/2π) from the potential curvature at a
/// validated minimum.
///
/// The second derivative is a central finite difference at step
/// `CURVATURE_STEP` with one Richardson halving; the two estimates must
/// agree to 1% or the computation is rejected as non-converged.
pub fn axial_frequency(
    v1: f64,
    v2: f64,
    table: &ShapeFactorTable,
    x_min: f64,
    mass: f64,
    charge: f64,
) -> Result<f64> {
    let v_at = |x: f64| potential_at(x, v1, v2, table);
    let h = CURVATURE_STEP;
    let second = |h: f64| -> Result<f64> {
        Ok((v_at(x_min - h)? - 2.0 * v_at(x_min)? + v_at(x_min + h)?) / (h * h))
    };
    let coarse = second(h)?;
    let fine = second(0.5 * h)?;
    if fine == 0.0 || coarse == 0.0 {
        return Err(Error::NotAMinimum {
            x_um: x_min * 1e6,
            curvature: 0.0,
        });
    }
    let rel = ((coarse - fine) / fine).abs();
    if rel > 1e-2 {
        return Err(Error::CurvatureNotConverged { rel });
    }
    let curvature = (4.0 * fine - coarse) / 3.0;
    let energy_curvature = charge * curvature;
    if energy_curvature <= 0.0 {
        return Err(Error::NotAMinimum {
            x_um: x_min * 1e6,
            curvature: energy_curvature,
        });
    }
    Ok((energy_curvature / mass).sqrt() / (2.0 * std::f64::consts::PI))
}

/// Ratio of pulse duration to the axial oscillation period.
pub fn adiabaticity_ratio(scenario: &TransportScenario, axial_freq: f64) -> f64 {
    scenario.duration * axial_freq
}

/// Track the potential minimum over the voltage pulse.
///
/// Sample `k` of the result is the minimizer of V(x; V₁, V₂(t_k)) on a
/// uniform time grid, each solve seeded with the previous position. The
/// trajectory must return to its start within the minimizer tolerance.
pub fn compute_trajectory(
    scenario: &TransportScenario,
    table: &ShapeFactorTable,
) -> Result<Trajectory> {
    scenario.validate()?;
    let m = scenario.samples;
    let seed0 = table.segment(0).center();
    // First solve: walk out from the main-segment center, step ~ table span/1000.
    let (dom_lo, dom_hi) = table.domain();
    let step = (dom_hi - dom_lo) / 1000.0;
    let mut x_prev = find_minimum_near(scenario.v1, 0.0, table, seed0, step)?;

    let mut times = Vec::with_capacity(m + 1);
    let mut positions = Vec::with_capacity(m + 1);
    for k in 0..=m {
        // Pin the endpoints: duration * m / m may round one ulp past
        // duration, which both violates the waveform domain and breaks the
        // exact V2(T) = 0 endpoint contract.
        let t = if k == m {
            scenario.duration
        } else {
            scenario.duration * k as f64 / m as f64
        };
        let v2 = waveform_voltage(t, scenario)?;
        let x = find_minimum_near(scenario.v1, v2, table, x_prev, step)?;
        times.push(t);
        positions.push(x);
        x_prev = x;
    }

    let residual = (positions[m] - positions[0]).abs();
    if residual > MINIMIZER_TOL {
        return Err(Error::NonReturning {
            residual_um: residual * 1e6,
            tol_um: MINIMIZER_TOL * 1e6,
        });
    }
    Trajectory::from_samples(times, positions)
}

/// Transport diagnostics bundled for scenario reporting.
#[derive(Debug, Clone)]
pub struct TransportSummary {
    pub trajectory: Trajectory,
    /// Axial frequency at the resting minimum, Hz.
    pub axial_frequency: f64,
    /// duration x axial frequency.
    pub adiabaticity: f64,
    /// False when the adiabaticity ratio is below `ADIABATIC_WARN_RATIO`.
    pub adiabatic: bool,
    /// ∫[x(t) − x(0)]dt over the pulse, m·s.
    pub displacement_integral: f64,
}

/// Compute trajectory, axial frequency, adiabaticity and the
/// displacement-time integral in one pass.
pub fn transport_summary(
    scenario: &TransportScenario,
    table: &ShapeFactorTable,
    mass: f64,
    charge: f64,
) -> Result<TransportSummary> {
    let trajectory = compute_trajectory(scenario, table)?;
    let x0 = trajectory.start_position();
    let f = axial_frequency(scenario.v1, 0.0, table, x0, mass, charge)?;
    let ratio = adiabaticity_ratio(scenario, f);
    let integral = displacement_time_integral(&trajectory)?;
    Ok(TransportSummary {
        trajectory,
        axial_frequency: f,
        adiabaticity: ratio,
        adiabatic: ratio >= ADIABATIC_WARN_RATIO,
        displacement_integral: integral,
    })
}

/// ∫[x(t) − x(0)]dt by composite Simpson quadrature, m·s.
///
/// Requires a uniform time grid. An odd interval count is handled with a
/// Simpson 3/8 tail on the last three intervals.
pub fn displacement_time_integral(traj: &Trajectory) -> Result<f64> {
    let times = traj.times();
    let xs = traj.positions();
    let n = times.len() - 1;
    if times.len() < 3 {
        return Err(Error::invalid(
            "trajectory",
            "quadrature needs at least 3 samples",
        ));
    }
    let h = (times[n] - times[0]) / n as f64;
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1e-300) {
            return Err(Error::invalid(
                "trajectory",
                format!("time grid not uniform at sample {k}"),
            ));
        }
    }
    let x0 = xs[0];
    let f = |k: usize| xs[k] - x0;

    let simpson = |from: usize, to: usize| -> f64 {
        // `to - from` even.
        let mut acc = f(from) + f(to);
        for k in (from + 1)..to {
            acc += if (k - from) % 2 == 1 { 4.0 } else { 2.0 } * f(k);
        }
        acc * h / 3.0
    };

    if n.is_multiple_of(2) {
        Ok(simpson(0, n))
    } else if n == 3 {
        Ok(3.0 * h / 8.0 * (f(0) + 3.0 * f(1) + 3.0 * f(2) + f(3)))
    } else {
        let body = simpson(0, n - 3);
        let tail = 3.0 * h / 8.0 * (f(n - 3) + 3.0 * f(n - 2) + 3.0 * f(n - 1) + f(n));
        Ok(body + tail)
    }
}

/// Solve for the peak neighbor voltage that displaces the minimum by
/// `target` meters at the waveform peak. Bisection on |V₂|, same sign as V₁.
pub fn tune_v2_peak(table: &ShapeFactorTable, v1: f64, target: f64) -> Result<f64> {
    if target <= 0.0 || target.is_nan() {
        return Err(Error::invalid("target displacement", "must be positive"));
    }
    let (dom_lo, dom_hi) = table.domain();
    let step = (dom_hi - dom_lo) / 1000.0;
    let x0 = find_minimum_near(v1, 0.0, table, table.segment(0).center(), step)?;
    let sign = v1.signum();
    let displacement = |mag: f64| -> Result<f64> {
        let x = find_minimum_near(v1, sign * mag, table, x0, step)?;
        Ok((x - x0).abs())
    };
    let mut lo = 0.0;
    let mut hi = v1.abs();
    // Grow until the peak displacement overshoots the target.
    let mut guard = 0;
    while displacement(hi)? < target {
        hi *= 2.0;
        guard += 1;
        if guard > 8 {
            return Err(Error::invalid(
                "target displacement",
                format!("{} um not reachable with this table", target * 1e6),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if displacement(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * v1.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::SyntheticShape;

    fn default_table() -> ShapeFactorTable {
        ShapeFactorTable::synthetic(&SyntheticShape::default()).unwrap()
    }

    fn default_scenario() -> TransportScenario {
        TransportScenario {
            v1: -6.0,
            v2_peak: -3.2766,
            duration: 400e-6,
            waveform: WaveformKind::SineReturn,
            samples: 400,
        }
    }

    #[test]
    fn potential_single_segment_at_center_is_v1() {
        let table = default_table();
        let c = table.segment(0).center();
        let v = potential_at(c, -6.0, 0.0, &table).unwrap();
        assert!((v - -6.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn potential_zero_voltages_is_zero() {
        let table = default_table();
        assert_eq!(potential_at(100e-6, 0.0, 0.0, &table).unwrap(), 0.0);
    }

    #[test]
    fn potential_is_linear_in_voltages() {
        let table = default_table();
        let x = 75e-6;
        let base = potential_at(x, -6.0, -3.0, &table).unwrap();
        let scaled = potential_at(x, -6.0 * 2.5, -3.0 * 2.5, &table).unwrap();
        assert!((scaled - 2.5 * base).abs() < 1e-12 * base.abs());
    }

    #[test]
    fn waveform_endpoints_exact_and_peak() {
        let sc = default_scenario();
        assert_eq!(waveform_voltage(0.0, &sc).unwrap(), 0.0);
        assert_eq!(waveform_voltage(sc.duration, &sc).unwrap(), 0.0);
        let peak = waveform_voltage(sc.duration / 2.0, &sc).unwrap();
        assert!((peak - sc.v2_peak).abs() < 1e-12);
        // quarter period: v2_peak * sin(pi/4)
        let q = waveform_voltage(sc.duration / 4.0, &sc).unwrap();
        let expect = -3.2766 * std::f64::consts::FRAC_PI_4.sin();
        assert!((q - expect).abs() < 1e-12);
        assert!(waveform_voltage(-1e-9, &sc).is_err());
        assert!(waveform_voltage(sc.duration + 1e-9, &sc).is_err());
    }

    #[test]
    fn minimum_of_single_symmetric_well_is_its_center() {
        // The synthetic segment-0 Gaussian is centered at exactly 0.
        let table = default_table();
        let x = find_minimum(-6.0, 0.0, &table, (-200e-6, 200e-6)).unwrap();
        assert!(x.abs() < 2.0 * MINIMIZER_TOL, "x={x}");
    }

    #[test]
    fn equal_voltages_on_identical_shapes_put_minimum_midway() {
        let table = default_table();
        let c0 = table.segment(0).center();
        let c1 = table.segment(1).center();
        let mid = 0.5 * (c0 + c1);
        let x = find_minimum(-6.0, -6.0, &table, (c0, c1)).unwrap();
        assert!((x - mid).abs() < 1e-9, "x={x} mid={mid}");
    }

    #[test]
    fn no_minimum_reported_when_bracket_misses_the_well() {
        let table = default_table();
        // Entirely on the far decaying tail: derivative never flips for a
        // positive-charge energy minimum.
        let err = find_minimum(-6.0, 0.0, &table, (600e-6, 900e-6)).unwrap_err();
        assert!(matches!(err, Error::NoMinimum { .. }), "{err}");
    }

    #[test]
    fn multiple_minima_detected() {
        // Narrow, well separated wells on a shared domain.
        let table = ShapeFactorTable::synthetic(&SyntheticShape {
            centers: vec![0.0, 400e-6],
            width: 40e-6,
            samples: 2001,
            margin_widths: 3.0,
        })
        .unwrap();
        let err = find_minimum(-6.0, -6.0, &table, (-100e-6, 500e-6)).unwrap_err();
        assert!(
            matches!(err, Error::MultipleMinima { count: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn axial_frequency_default_config_is_1p35_mhz() {
        let table = default_table();
        let x0 = find_minimum(-6.0, 0.0, &table, (-100e-6, 100e-6)).unwrap();
        let f = axial_frequency(
            -6.0,
            0.0,
            &table,
            x0,
            crate::constants::CA40_MASS,
            crate::constants::ELEMENTARY_CHARGE,
        )
        .unwrap();
        assert!(
            (f - 1.35e6).abs() < 0.01 * 1.35e6,
            "axial frequency {f} Hz not within 1% of 1.35 MHz"
        );
    }

    #[test]
    fn curvature_rejects_maximum() {
        let table = default_table();
        let c = table.segment(0).center();
        // Positive voltage turns the well into a hump for a positive charge.
        let err = axial_frequency(
            6.0,
            0.0,
            &table,
            c,
            crate::constants::CA40_MASS,
            crate::constants::ELEMENTARY_CHARGE,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotAMinimum { .. }), "{err}");
    }

    #[test]
    fn trajectory_without_drive_is_constant() {
        let table = default_table();
        let sc = TransportScenario {
            v2_peak: 0.0,
            samples: 64,
            ..default_scenario()
        };
        let traj = compute_trajectory(&sc, &table).unwrap();
        assert!(traj.max_displacement() < 2.0 * MINIMIZER_TOL);
    }

    #[test]
    fn default_transport_reaches_140_um_and_returns() {
        let table = default_table();
        let traj = compute_trajectory(&default_scenario(), &table).unwrap();
        let d = traj.max_displacement();
        assert!(
            (d - 140e-6).abs() < 0.01 * 140e-6,
            "max displacement {} um",
            d * 1e6
        );
        let n = traj.positions().len() - 1;
        assert!((traj.positions()[n] - traj.positions()[0]).abs() <= MINIMIZER_TOL);
    }

    #[test]
    fn integral_of_constant_trajectory_is_zero() {
        let times: Vec<f64> = (0..=64).map(|k| k as f64 * 1e-6).collect();
        let traj = Trajectory::from_samples(times, vec![5e-6; 65]).unwrap();
        assert_eq!(displacement_time_integral(&traj).unwrap(), 0.0);
    }

    #[test]
    fn integral_rejects_too_few_samples() {
        let traj = Trajectory::from_samples(vec![0.0, 1e-6], vec![0.0, 1e-6]).unwrap();
        assert!(displacement_time_integral(&traj).is_err());
    }

    #[test]
    fn transport_summary_flags_non_adiabatic_pulses() {
        let table = default_table();
        let slow = transport_summary(
            &default_scenario(),
            &table,
            crate::constants::CA40_MASS,
            crate::constants::ELEMENTARY_CHARGE,
        )
        .unwrap();
        assert!(slow.adiabatic);
        assert!((slow.adiabaticity - 540.0).abs() < 5.0);
        // A 20 us pulse is only ~27 axial periods: flagged.
        let fast = transport_summary(
            &TransportScenario {
                duration: 20e-6,
                ..default_scenario()
            },
            &table,
            crate::constants::CA40_MASS,
            crate::constants::ELEMENTARY_CHARGE,
        )
        .unwrap();
        assert!(!fast.adiabatic);
        assert!(fast.adiabaticity < ADIABATIC_WARN_RATIO);
    }

    #[test]
    fn integral_matches_half_sine_closed_form() {
        // x(t) - x(0) = d sin(pi t / T): integral 2dT/pi.
        let d = 100e-6;
        let big_t = 0.4e-3;
        let n = 400;
        let times: Vec<f64> = (0..=n).map(|k| big_t * k as f64 / n as f64).collect();
        let xs: Vec<f64> = times
            .iter()
            .map(|t| d * (std::f64::consts::PI * t / big_t).sin())
            .collect();
        let traj = Trajectory::from_samples(times, xs).unwrap();
        let got = displacement_time_integral(&traj).unwrap();
        let expect = 2.0 * d * big_t / std::f64::consts::PI; // 2.546479e-8 m s = 25.46 um ms
        assert!(((got - expect) / expect).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn integral_handles_odd_interval_count() {
        let d = 100e-6;
        let big_t = 0.4e-3;
        let n = 401; // odd interval count exercises the 3/8 tail
        let times: Vec<f64> = (0..=n).map(|k| big_t * k as f64 / n as f64).collect();
        let xs: Vec<f64> = times
            .iter()
            .map(|t| d * (std::f64::consts::PI * t / big_t).sin())
            .collect();
        let traj = Trajectory::from_samples(times, xs).unwrap();
        let got = displacement_time_integral(&traj).unwrap();
        let expect = 2.0 * d * big_t / std::f64::consts::PI;
        assert!(((got - expect) / expect).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn adiabaticity_of_default_scenario() {
        let sc = default_scenario();
        let ratio = adiabaticity_ratio(&sc, 1.35e6);
        assert!((ratio - 540.0).abs() < 1e-9);
        let unit = adiabaticity_ratio(
            &TransportScenario {
                duration: 1.0 / 1.35e6,
                ..sc
            },
            1.35e6,
        );
        assert!((unit - 1.0).abs() < 1e-12);
        let double = adiabaticity_ratio(
            &TransportScenario {
                duration: 0.8e-3,
                ..sc
            },
            1.35e6,
        );
        assert!((double - 1080.0).abs() < 1e-9);
    }

    #[test]
    fn trajectory_handles_awkward_duration_sample_combinations() {
        // duration * k / m can round past duration at k = m; the endpoint
        // must still be sampled exactly at t = T.
        let table = default_table();
        for (duration, samples) in [(3e-4, 67), (7e-4, 331), (1.1e-4, 93), (4e-4, 400)] {
            let sc = TransportScenario {
                duration,
                samples,
                v2_peak: -1.0,
                ..default_scenario()
            };
            let traj = compute_trajectory(&sc, &table).unwrap();
            assert_eq!(*traj.times().last().unwrap(), duration);
        }
    }

    #[test]
    fn tune_v2_peak_hits_target_displacement() {
        let table = default_table();
        let v2 = tune_v2_peak(&table, -6.0, 19e-6).unwrap();
        assert!(v2 < 0.0);
        let sc = TransportScenario {
            v2_peak: v2,
            samples: 64,
            ..default_scenario()
        };
        let traj = compute_trajectory(&sc, &table).unwrap();
        assert!(
            (traj.max_displacement() - 19e-6).abs() < 1e-9,
            "displacement {} um",
            traj.max_displacement() * 1e6
        );
    }
}
