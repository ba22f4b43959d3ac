//! Spin-echo phase accumulation and projection-noise sampling.
//!
//! During the transport pulse, inserted between the first π/2 pulse and the
//! π pulse of a spin echo, the qubit picks up phase proportional to the
//! field it sees; the stationary second half cancels everything static, so
//! the surviving echo phase is the gradient term
//!
//!   φ = (g_J μ_B / ħ) · (∂B/∂x) · ∫ [x(t) − x(0)] dt.
//!
//! Reading the spin out after the closing π/2 pulse of angle θ is a
//! Bernoulli trial with success probability p(θ, φ) = A₁cos(θ + φ) + A₂,
//! where contrast A₁ and offset A₂ absorb all technical decoherence. A full
//! fringe record is the set of spin-up counts over a list of analysis
//! angles, sampled with the deterministic counter RNG so that any record is
//! a pure function of (inputs, seed).

use crate::constants::{G_J, MU_B, PLANCK_H, ZEEMAN_PHASE_RATE};
use crate::error::{Error, Result};
use crate::rng::{binomial, CounterRng};
use crate::trap::{displacement_time_integral, Trajectory};

/// Static magnetic field model along the trap axis: offset plus linear
/// gradient, with an optional slow drift of the field difference seen by
/// the transported ion.
#[derive(Debug, Clone, Copy)]
pub struct FieldModel {
    /// Offset field B₀ at the resting position, T.
    pub b0: f64,
    /// Axial gradient ∂B/∂x, T/m.
    pub gradient: f64,
    /// Drift rate of the field difference across the probe distance, T/s.
    /// Models slow common-mode changes of the coil currents; zero disables.
    pub drift_rate: f64,
}

impl FieldModel {
    pub fn new(b0: f64, gradient: f64) -> Result<Self> {
        Self::with_drift(b0, gradient, 0.0)
    }

    pub fn with_drift(b0: f64, gradient: f64, drift_rate: f64) -> Result<Self> {
        if b0 <= 0.0 || b0.is_nan() {
            return Err(Error::invalid("field model", "B0 must be positive"));
        }
        if !gradient.is_finite() || !drift_rate.is_finite() {
            return Err(Error::invalid("field model", "non-finite parameter"));
        }
        Ok(Self {
            b0,
            gradient,
            drift_rate,
        })
    }

    /// Check that B stays positive over an axial interval (m).
    pub fn positive_over(&self, lo: f64, hi: f64) -> bool {
        self.b0 + self.gradient * lo > 0.0 && self.b0 + self.gradient * hi > 0.0
    }
}

/// Contrast amplitude and offset of the echo fringe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeParams {
    a1: f64,
    a2: f64,
}

impl FringeParams {
    /// Validates 0 < A₁ ≤ 1/2, A₂ − A₁ ≥ 0 and A₂ + A₁ ≤ 1 so every fringe
    /// probability stays in [0, 1].
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a1 <= 0.5) {
            return Err(Error::invalid(
                "fringe params",
                format!("A1 = {a1} outside (0, 0.5]"),
            ));
        }
        if a2 - a1 < 0.0 || a2 + a1 > 1.0 {
            return Err(Error::invalid(
                "fringe params",
                format!("A1 = {a1}, A2 = {a2} push probabilities outside [0, 1]"),
            ));
        }
        Ok(Self { a1, a2 })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }
}

/// Spin-up counts per analysis angle for one fringe interrogation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoRecord {
    pub points: Vec<EchoPoint>,
    /// Seed the record was sampled with, for replay.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoPoint {
    /// Analysis pulse angle θ, rad.
    pub angle: f64,
    /// Interrogations at this angle.
    pub interrogations: u64,
    /// Spin-up outcomes among them.
    pub spin_up: u64,
}

impl EchoPoint {
    pub fn up_fraction(&self) -> f64 {
        self.spin_up as f64 / self.interrogations as f64
    }
}

/// Zeeman splitting frequency g_J μ_B B / h between the m_J = ±1/2 ground
/// states, Hz. About 19.6 MHz at 0.7 mT.
pub fn zeeman_splitting(b: f64) -> Result<f64> {
    if b < 0.0 {
        return Err(Error::invalid("field", "negative magnitude"));
    }
    Ok(G_J * MU_B * b / PLANCK_H)
}

/// Echo phase from transport through a static linear gradient, rad.
pub fn accumulated_phase(traj: &Trajectory, field: &FieldModel) -> Result<f64> {
    let integral = displacement_time_integral(traj)?;
    Ok(ZEEMAN_PHASE_RATE * field.gradient * integral)
}

/// Echo phase including the drift model, evaluated at `wall_time` seconds
/// into the measurement sequence.
///
/// The drifting field difference contributes through an effective gradient
/// g + r·t/d (d = probe distance), plus the echo-asymmetry bias
/// −(g_J μ_B/ħ)·r·T² from the field changing between the two echo halves.
pub fn echo_phase_at(traj: &Trajectory, field: &FieldModel, wall_time: f64) -> Result<f64> {
    let integral = displacement_time_integral(traj)?;
    if field.drift_rate == 0.0 {
        return Ok(ZEEMAN_PHASE_RATE * field.gradient * integral);
    }
    let probe = traj.max_displacement();
    let drifted_gradient = if probe > 0.0 {
        field.gradient + field.drift_rate * wall_time / probe
    } else {
        field.gradient
    };
    let duration = traj.duration();
    let bias = -ZEEMAN_PHASE_RATE * field.drift_rate * duration * duration;
    Ok(ZEEMAN_PHASE_RATE * drifted_gradient * integral + bias)
}

/// Spin-up probability A₁cos(θ + φ) + A₂, clamped to [0, 1] against
/// floating-point spill.
pub fn echo_probability(theta: f64, phi: f64, fringe: &FringeParams) -> f64 {
    (fringe.a1 * (theta + phi).cos() + fringe.a2).clamp(0.0, 1.0)
}

/// Quantum projection noise: k ~ Binomial(N, p), deterministic in
/// (p, N, seed).
pub fn simulate_interrogations(p: f64, n: u64, seed: u64) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("probability", format!("{p} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::invalid("interrogations", "need at least one"));
    }
    Ok(binomial(&CounterRng::new(seed), n, p))
}

/// One full fringe interrogation run at wall time zero.
pub fn run_echo_experiment(
    traj: &Trajectory,
    field: &FieldModel,
    fringe: &FringeParams,
    angles: &[f64],
    n_per_angle: u64,
    seed: u64,
) -> Result<EchoRecord> {
    run_echo_experiment_at(traj, field, fringe, angles, n_per_angle, seed, 0.0)
}

/// One full fringe interrogation run starting at `wall_time` seconds.
///
/// Angle sub-streams are derived from (seed, angle index), so per-angle
/// batches are independent and may be evaluated in any order.
pub fn run_echo_experiment_at(
    traj: &Trajectory,
    field: &FieldModel,
    fringe: &FringeParams,
    angles: &[f64],
    n_per_angle: u64,
    seed: u64,
    wall_time: f64,
) -> Result<EchoRecord> {
    if angles.is_empty() {
        return Err(Error::invalid("echo experiment", "no analysis angles"));
    }
    if n_per_angle == 0 {
        return Err(Error::invalid(
            "echo experiment",
            "n_per_angle must be >= 1",
        ));
    }
    let phi = echo_phase_at(traj, field, wall_time)?;
    let root = CounterRng::new(seed);
    let points = angles
        .iter()
        .enumerate()
        .map(|(idx, &theta)| {
            let p = echo_probability(theta, phi, fringe);
            let k = binomial(&root.derive(idx as u64), n_per_angle, p);
            EchoPoint {
                angle: theta,
                interrogations: n_per_angle,
                spin_up: k,
            }
        })
        .collect();
    Ok(EchoRecord { points, seed })
}

/// Simulated wall-clock bookkeeping: interrogations take real detection
/// time in the lab, and the drift model advances on that clock. Nothing
/// here ever sleeps.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentClock {
    /// Seconds per single ion interrogation (detection time).
    pub detection_time: f64,
    /// Elapsed simulated seconds.
    pub elapsed: f64,
    /// Total interrogations performed.
    pub interrogations: u64,
}

impl ExperimentClock {
    pub fn new(detection_time: f64) -> Self {
        Self {
            detection_time,
            elapsed: 0.0,
            interrogations: 0,
        }
    }

    pub fn advance(&mut self, interrogations: u64) {
        self.interrogations += interrogations;
        self.elapsed += interrogations as f64 * self.detection_time;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap::Trajectory;
    use std::f64::consts::PI;

    fn sine_trajectory(d: f64, duration: f64, n: usize) -> Trajectory {
        let times: Vec<f64> = (0..=n).map(|k| duration * k as f64 / n as f64).collect();
        let xs: Vec<f64> = times
            .iter()
            .map(|t| d * (PI * t / duration).sin())
            .collect();
        Trajectory::from_samples(times, xs).unwrap()
    }

    #[test]
    fn zeeman_splitting_reference_points() {
        assert_eq!(zeeman_splitting(0.0).unwrap(), 0.0);
        // 0.7 mT -> 19.5947 MHz with CODATA constants.
        let f = zeeman_splitting(0.7e-3).unwrap();
        assert!((f / 1.95947e7 - 1.0).abs() < 1e-4, "{f}");
        // 1 T -> 27.992 GHz.
        let g = zeeman_splitting(1.0).unwrap();
        assert!((g / 2.79925e10 - 1.0).abs() < 1e-4, "{g}");
        assert!(zeeman_splitting(-1.0).is_err());
    }

    #[test]
    fn phase_zero_without_gradient() {
        let traj = sine_trajectory(100e-6, 400e-6, 400);
        let field = FieldModel::new(0.7e-3, 0.0).unwrap();
        assert_eq!(accumulated_phase(&traj, &field).unwrap(), 0.0);
    }

    #[test]
    fn phase_of_reference_sine_transport() {
        // d = 100 um, T = 400 us, g = 1 mT/m: phi = K * 1e-3 * 2dT/pi = 4.4788 rad.
        let traj = sine_trajectory(100e-6, 400e-6, 4000);
        let field = FieldModel::new(0.7e-3, 1e-3).unwrap();
        let phi = accumulated_phase(&traj, &field).unwrap();
        assert!((phi / 4.4788 - 1.0).abs() < 1e-3, "{phi}");
    }

    #[test]
    fn phase_is_linear_in_gradient() {
        let traj = sine_trajectory(50e-6, 400e-6, 400);
        let f1 = FieldModel::new(0.7e-3, 3.7e-4).unwrap();
        let f2 = FieldModel::new(0.7e-3, 7.4e-4).unwrap();
        let p1 = accumulated_phase(&traj, &f1).unwrap();
        let p2 = accumulated_phase(&traj, &f2).unwrap();
        assert!((p2 - 2.0 * p1).abs() < 1e-12 * p1.abs().max(1.0));
    }

    #[test]
    fn fringe_probabilities_reference_values() {
        let fringe = FringeParams::new(0.31, 0.44).unwrap();
        assert!((echo_probability(0.0, 0.0, &fringe) - 0.75).abs() < 1e-15);
        assert!((echo_probability(PI, 0.0, &fringe) - 0.13).abs() < 1e-15);
        // theta = pi/2, phi = pi/2 lands on cos(pi) = -1: A2 - A1.
        let v = echo_probability(PI / 2.0, PI / 2.0, &fringe);
        assert!((v - 0.13).abs() < 1e-15);
    }

    #[test]
    fn fringe_params_validation() {
        assert!(FringeParams::new(0.31, 0.44).is_ok());
        assert!(FringeParams::new(0.0, 0.5).is_err());
        assert!(FringeParams::new(0.6, 0.5).is_err());
        assert!(FringeParams::new(0.31, 0.25).is_err()); // A2 - A1 < 0
        assert!(FringeParams::new(0.31, 0.75).is_err()); // A2 + A1 > 1
    }

    #[test]
    fn interrogations_degenerate_probabilities() {
        assert_eq!(simulate_interrogations(0.0, 1000, 3).unwrap(), 0);
        assert_eq!(simulate_interrogations(1.0, 1000, 3).unwrap(), 1000);
    }

    #[test]
    fn interrogations_unbiased_at_large_n() {
        // p = 0.5, N = 1e6: k/N within 4 sigma = 4 * 5e-4.
        let k = simulate_interrogations(0.5, 1_000_000, 99).unwrap();
        let f = k as f64 / 1e6;
        assert!((f - 0.5).abs() < 0.002, "{f}");
    }

    #[test]
    fn interrogation_variance_matches_binomial() {
        // Empirical variance of k/N over 1e4 seeds at p = 0.75, N = 200
        // matches p(1-p)/N = 9.375e-4 within 5%.
        let trials = 10_000u64;
        let n = 200u64;
        let p = 0.75;
        let fracs: Vec<f64> = (0..trials)
            .map(|s| simulate_interrogations(p, n, s).unwrap() as f64 / n as f64)
            .collect();
        let mean = fracs.iter().sum::<f64>() / trials as f64;
        let var = fracs.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (trials - 1) as f64;
        let expect = p * (1.0 - p) / n as f64;
        assert!((var / expect - 1.0).abs() < 0.05, "var {var} vs {expect}");
    }

    #[test]
    fn echo_record_is_deterministic() {
        let traj = sine_trajectory(19e-6, 400e-6, 400);
        let field = FieldModel::new(0.7e-3, 3.7e-4).unwrap();
        let fringe = FringeParams::new(0.31, 0.44).unwrap();
        let angles: Vec<f64> = (0..100).map(|k| 2.0 * PI * k as f64 / 100.0).collect();
        let a = run_echo_experiment(&traj, &field, &fringe, &angles, 200, 7).unwrap();
        let b = run_echo_experiment(&traj, &field, &fringe, &angles, 200, 7).unwrap();
        assert_eq!(a, b);
        let c = run_echo_experiment(&traj, &field, &fringe, &angles, 200, 8).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.points.len(), 100);
        assert!(a.points.iter().all(|p| p.spin_up <= p.interrogations));
    }

    #[test]
    fn drift_disabled_matches_plain_phase() {
        let traj = sine_trajectory(19e-6, 400e-6, 400);
        let field = FieldModel::new(0.7e-3, 3.7e-4).unwrap();
        let a = accumulated_phase(&traj, &field).unwrap();
        let b = echo_phase_at(&traj, &field, 1e4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn drift_advances_with_wall_time() {
        let traj = sine_trajectory(19e-6, 400e-6, 400);
        let field = FieldModel::with_drift(0.7e-3, 0.0, 1e-12).unwrap();
        let p0 = echo_phase_at(&traj, &field, 0.0).unwrap();
        let p1 = echo_phase_at(&traj, &field, 100.0).unwrap();
        // 100 s of 1 pT/s drift across 19 um probe: phase grows by
        // K * (1e-10/19e-6) * I with I = integral of the sine trajectory.
        let integral = displacement_time_integral(&traj).unwrap();
        let expect = ZEEMAN_PHASE_RATE * (1e-12 * 100.0 / 19e-6) * integral;
        assert!(((p1 - p0) / expect - 1.0).abs() < 1e-9, "{}", p1 - p0);
    }

    #[test]
    fn clock_accumulates_detection_time() {
        let mut clock = ExperimentClock::new(5e-3);
        clock.advance(600);
        clock.advance(600);
        assert_eq!(clock.interrogations, 1200);
        assert!((clock.elapsed - 6.0).abs() < 1e-12);
    }
}
