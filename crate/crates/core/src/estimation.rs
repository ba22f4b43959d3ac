//! Phase, gradient and sensitivity estimation from echo records.
//!
//! Two phase estimators are implemented. The fringe fit solves the linear
//! least-squares problem for the basis {cos θ, sin θ, 1} of the spin-up
//! fractions, which is exact for the fringe model p = A₁cos(θ+φ) + A₂.
//! The three-point estimator needs only the angles {0, π/2, π}: the
//! normalized signal
//!
//!   S = (p(π/2) − p(π)) / (p(0) − p(π))
//!
//! is invariant under any affine rescaling of the probabilities, so it
//! cancels contrast and offset, and φ = arctan(1 − 2S). Projection noise
//! propagates through these expressions analytically, giving the
//! shot-noise limit of the phase error per Gaussian error propagation.
//!
//! Gradients come from a weighted straight-line fit of phase versus the
//! displacement-time integral; long-run stability is characterized with a
//! non-overlapping Allan deviation over the phase-estimate sequence.

use crate::constants::ZEEMAN_PHASE_RATE;
use crate::error::{Error, Result};
use crate::linalg::solve3;
use crate::spin::{echo_probability, EchoPoint, EchoRecord, FringeParams};

/// How a phase estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMethod {
    FringeFit,
    ThreePoint,
}

/// A phase estimate with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct PhaseEstimate {
    /// Estimated echo phase, rad.
    pub phi: f64,
    /// One-sigma uncertainty, rad.
    pub sigma: f64,
    pub method: EstimationMethod,
    /// Total interrogations that entered the estimate.
    pub n_total: u64,
}

/// Result of the linearized cosine fringe fit.
#[derive(Debug, Clone)]
pub struct FringeFit {
    /// Contrast amplitude.
    pub a1: f64,
    /// Offset.
    pub a2: f64,
    /// Phase estimate with uncertainty from the fit covariance.
    pub phase: PhaseEstimate,
    /// Covariance of the (cos, sin, offset) coefficients.
    pub covariance: [[f64; 3]; 3],
}

/// Weighted straight-line fit of phase versus displacement-time integral.
#[derive(Debug, Clone)]
pub struct GradientFit {
    /// Slope, rad per (m·s).
    pub slope: f64,
    /// Standard error of the slope, rad per (m·s).
    pub slope_stderr: f64,
    /// Intercept, rad.
    pub intercept: f64,
    /// Slope converted to a field gradient, T/m.
    pub gradient: f64,
    /// Standard error of the gradient, T/m.
    pub gradient_stderr: f64,
    /// Per-point fit residuals, rad.
    pub residuals: Vec<f64>,
}

/// Non-overlapping Allan deviation over a phase-estimate sequence.
#[derive(Debug, Clone)]
pub struct AllanSeries {
    pub points: Vec<AllanPoint>,
    /// Averaging sizes skipped because fewer than two blocks fit.
    pub omitted: Vec<usize>,
    /// Length of the underlying estimate sequence.
    pub sequence_len: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AllanPoint {
    /// Averaging block size, estimates per block.
    pub n: usize,
    /// Allan deviation at this size, rad.
    pub deviation: f64,
    /// Number of blocks that entered.
    pub blocks: usize,
}

/// Running mean of a prefix with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct RunningMean {
    pub mean: f64,
    /// Sample std of the prefix divided by sqrt(k); zero for the first point.
    pub stderr: f64,
}

/// Fit A₁cos(θ+φ) + A₂ to the up-fractions of an echo record.
///
/// The fit is linear in (c, s, A₂) with c = A₁cos φ, s = −A₁sin φ. Points
/// are weighted with the inverse binomial variance, floored at a Bernoulli
/// variance of 1/(4N) so counts of 0 or N keep finite weight. A first pass
/// evaluates the variance at the observed fractions; one reweighting pass
/// then uses the fitted probabilities, which decouples the weights from
/// the per-point noise and keeps the reported uncertainty calibrated.
#[allow(clippy::type_complexity)]
pub fn fit_fringe(record: &EchoRecord) -> Result<FringeFit> {
    let pts = &record.points;
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.angle).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::RankDeficient {
            why: format!(
                "{} distinct angles; the fringe fit needs at least 4",
                distinct.len()
            ),
        });
    }
    let span = distinct.last().unwrap() - distinct.first().unwrap();
    if span <= std::f64::consts::PI {
        return Err(Error::RankDeficient {
            why: format!("angles span {span:.3} rad; must exceed pi"),
        });
    }

    let n_total: u64 = pts.iter().map(|p| p.interrogations).sum();
    let solve_pass = |prob_at: &dyn Fn(&EchoPoint) -> f64| -> Result<([f64; 3], [[f64; 3]; 3])> {
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        for p in pts.iter() {
            let n = p.interrogations as f64;
            let prob = prob_at(p);
            let var = (prob * (1.0 - prob)).max(0.25 / n) / n;
            let w = 1.0 / var;
            let basis = [p.angle.cos(), p.angle.sin(), 1.0];
            for i in 0..3 {
                for j in 0..3 {
                    ata[i][j] += w * basis[i] * basis[j];
                }
                atb[i] += w * basis[i] * p.up_fraction();
            }
        }
        solve3(ata, atb).ok_or_else(|| Error::RankDeficient {
            why: "degenerate fringe design matrix".into(),
        })
    };

    let (first, _) = solve_pass(&|p| p.up_fraction())?;
    let fitted = |p: &EchoPoint| {
        (first[0] * p.angle.cos() + first[1] * p.angle.sin() + first[2]).clamp(0.0, 1.0)
    };
    let (coef, cov) = solve_pass(&fitted)?;
    let (c, s, a2) = (coef[0], coef[1], coef[2]);
    let a1 = c.hypot(s);
    if a1 < 1e-9 {
        return Err(Error::DegenerateFringe { a1 });
    }
    let phi = (-s).atan2(c);
    // Delta method: dphi/dc = s/r^2, dphi/ds = -c/r^2.
    let r2 = a1 * a1;
    let (dc, ds) = (s / r2, -c / r2);
    let var_phi = dc * dc * cov[0][0] + ds * ds * cov[1][1] + 2.0 * dc * ds * cov[0][1];
    Ok(FringeFit {
        a1,
        a2,
        phase: PhaseEstimate {
            phi,
            sigma: var_phi.max(0.0).sqrt(),
            method: EstimationMethod::FringeFit,
            n_total,
        },
        covariance: cov,
    })
}

/// Normalized three-point signal S = (p_half − p_π)/(p₀ − p_π).
pub fn three_point_signal(p0: f64, p_half: f64, p_pi: f64) -> Result<f64> {
    let denom = p0 - p_pi;
    if denom.abs() < 1e-6 {
        return Err(Error::ContrastCollapse { delta: denom.abs() });
    }
    Ok((p_half - p_pi) / denom)
}

/// Invert the normalized signal: φ = arctan(1 − 2S) ∈ (−π/2, π/2).
pub fn phase_from_signal(s: f64) -> f64 {
    (1.0 - 2.0 * s).atan()
}

/// Partial derivatives ∂φ/∂p at the three analysis angles, for the signal
/// probabilities (p₀, p_half, p_π).
fn three_point_partials(p0: f64, p_half: f64, p_pi: f64) -> Result<[f64; 3]> {
    let denom = p0 - p_pi;
    if denom.abs() < 1e-6 {
        return Err(Error::ContrastCollapse { delta: denom.abs() });
    }
    let s = (p_half - p_pi) / denom;
    let u = 1.0 - 2.0 * s;
    let dphi_ds = -2.0 / (1.0 + u * u);
    let ds_dp0 = -(p_half - p_pi) / (denom * denom);
    let ds_dph = 1.0 / denom;
    let ds_dppi = (p_half - p0) / (denom * denom);
    Ok([dphi_ds * ds_dp0, dphi_ds * ds_dph, dphi_ds * ds_dppi])
}

/// Shot-noise limit of the three-point phase error, rad.
///
/// Propagates the binomial variance p(1−p)/N of each of the three
/// measured probabilities through S and the arctan. Probabilities pinned
/// at 0 or 1 contribute zero variance; only when all three are pinned is
/// the result degenerate.
pub fn shot_noise_sigma(fringe: &FringeParams, phi: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("interrogations", "need at least one"));
    }
    let p0 = echo_probability(0.0, phi, fringe);
    let p_half = echo_probability(std::f64::consts::FRAC_PI_2, phi, fringe);
    let p_pi = echo_probability(std::f64::consts::PI, phi, fringe);
    let partials = three_point_partials(p0, p_half, p_pi)?;
    let var: f64 = [p0, p_half, p_pi]
        .iter()
        .zip(partials.iter())
        .map(|(&p, &d)| d * d * p * (1.0 - p) / n as f64)
        .sum();
    if var == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(var.sqrt())
}

/// Three-point phase estimate from a record holding angles {0, π/2, π}.
///
/// The uncertainty uses the same error propagation as `shot_noise_sigma`
/// but evaluated at the observed fractions, with the Bernoulli variance
/// floored at 1/(4N) so boundary counts keep a finite error bar.
pub fn three_point_estimate(record: &EchoRecord) -> Result<PhaseEstimate> {
    let lookup = |target: f64| -> Result<(f64, u64)> {
        record
            .points
            .iter()
            .find(|p| (p.angle - target).abs() < 1e-12)
            .map(|p| (p.up_fraction(), p.interrogations))
            .ok_or_else(|| {
                Error::invalid(
                    "three-point record",
                    format!("missing analysis angle {target:.4} rad"),
                )
            })
    };
    let (p0, n0) = lookup(0.0)?;
    let (p_half, nh) = lookup(std::f64::consts::FRAC_PI_2)?;
    let (p_pi, npi) = lookup(std::f64::consts::PI)?;
    let s = three_point_signal(p0, p_half, p_pi)?;
    let phi = phase_from_signal(s);
    let partials = three_point_partials(p0, p_half, p_pi)?;
    let var: f64 = [(p0, n0), (p_half, nh), (p_pi, npi)]
        .iter()
        .zip(partials.iter())
        .map(|(&(p, n), &d)| d * d * (p * (1.0 - p)).max(0.25 / n as f64) / n as f64)
        .sum();
    Ok(PhaseEstimate {
        phi,
        sigma: var.sqrt(),
        method: EstimationMethod::ThreePoint,
        n_total: n0 + nh + npi,
    })
}

/// Weighted linear regression of phase on the displacement-time integral.
///
/// `points` pairs each integral (m·s) with a phase estimate; weights are
/// 1/σ². The slope (rad per m·s) divided by g_J μ_B/ħ is the gradient in
/// T/m.
pub fn gradient_fit(points: &[(f64, PhaseEstimate)]) -> Result<GradientFit> {
    if points.len() < 2 {
        return Err(Error::RankDeficient {
            why: format!("{} points; the gradient fit needs at least 2", points.len()),
        });
    }
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, est) in points {
        if est.sigma <= 0.0 || est.sigma.is_nan() {
            return Err(Error::invalid("gradient fit", "non-positive sigma"));
        }
        let w = 1.0 / (est.sigma * est.sigma);
        sw += w;
        sx += w * x;
        sy += w * est.phi;
        sxx += w * x * x;
        sxy += w * x * est.phi;
    }
    let delta = sw * sxx - sx * sx;
    let scale = sw * sxx;
    if delta.abs() < 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::RankDeficient {
            why: "all displacement-time integrals coincide".into(),
        });
    }
    let slope = (sw * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let slope_stderr = (sw / delta).sqrt();
    let residuals = points
        .iter()
        .map(|(x, est)| est.phi - (intercept + slope * x))
        .collect();
    Ok(GradientFit {
        slope,
        slope_stderr,
        intercept,
        gradient: slope / ZEEMAN_PHASE_RATE,
        gradient_stderr: slope_stderr / ZEEMAN_PHASE_RATE,
        residuals,
    })
}

/// Unwrap a phase sequence: shift each element by multiples of 2π to land
/// within π of its predecessor. Valid while true steps stay below π.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &phi) in phases.iter().enumerate() {
        if i > 0 {
            let prev: f64 = out[i - 1];
            let mut candidate = phi + offset;
            while candidate - prev > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
                candidate = phi + offset;
            }
            while candidate - prev < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
                candidate = phi + offset;
            }
        }
        out.push(phi + offset);
    }
    out
}

/// Running prefix means with their standard errors (Welford update, so a
/// constant sequence reports exactly zero error bars).
pub fn running_mean_series(estimates: &[f64]) -> Vec<RunningMean> {
    let mut out = Vec::with_capacity(estimates.len());
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in estimates.iter().enumerate() {
        let k = (i + 1) as f64;
        let delta = x - mean;
        mean += delta / k;
        m2 += delta * (x - mean);
        let stderr = if i == 0 {
            0.0
        } else {
            (m2 / (k - 1.0) / k).max(0.0).sqrt()
        };
        out.push(RunningMean { mean, stderr });
    }
    out
}

/// Non-overlapping Allan deviation of the estimate sequence at the given
/// averaging sizes. Sizes with fewer than two complete blocks are omitted
/// and reported in `omitted`.
pub fn allan_deviation(estimates: &[f64], sizes: &[usize]) -> Result<AllanSeries> {
    if estimates.len() < 2 {
        return Err(Error::invalid(
            "allan deviation",
            "need at least 2 estimates",
        ));
    }
    let mut points = Vec::new();
    let mut omitted = Vec::new();
    for &n in sizes {
        if n == 0 {
            return Err(Error::invalid("allan deviation", "size 0 is meaningless"));
        }
        let blocks = estimates.len() / n;
        if blocks < 2 {
            omitted.push(n);
            continue;
        }
        let means: Vec<f64> = (0..blocks)
            .map(|b| estimates[b * n..(b + 1) * n].iter().sum::<f64>() / n as f64)
            .collect();
        let sq_sum: f64 = means
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .sum();
        let deviation = (sq_sum / (2.0 * (blocks - 1) as f64)).sqrt();
        points.push(AllanPoint {
            n,
            deviation,
            blocks,
        });
    }
    Ok(AllanSeries {
        points,
        omitted,
        sequence_len: estimates.len(),
    })
}

/// Convert a phase to the relative field difference it implies.
///
/// The field difference across `probe_distance` follows from inverting the
/// phase integral: ΔB = φ / (K · I / d), with K = g_J μ_B/ħ, I the
/// displacement-time integral and d the probe distance. Returned as ΔB/B₀.
pub fn phase_to_relative_field(
    phi: f64,
    integral: f64,
    probe_distance: f64,
    b0: f64,
) -> Result<f64> {
    if integral <= 0.0 || integral.is_nan() {
        return Err(Error::invalid(
            "relative field",
            "displacement-time integral must be positive",
        ));
    }
    if probe_distance <= 0.0 || b0 <= 0.0 || probe_distance.is_nan() || b0.is_nan() {
        return Err(Error::invalid(
            "relative field",
            "probe distance and B0 must be positive",
        ));
    }
    let delta_b = phi / (ZEEMAN_PHASE_RATE * integral / probe_distance);
    Ok(delta_b / b0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{EchoPoint, EchoRecord};
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Noiseless record: counts rounded from exact probabilities at huge N.
    fn noiseless_record(a1: f64, a2: f64, phi: f64, angles: &[f64], n: u64) -> EchoRecord {
        let fringe = FringeParams::new(a1, a2).unwrap();
        let points = angles
            .iter()
            .map(|&theta| {
                let p = echo_probability(theta, phi, &fringe);
                EchoPoint {
                    angle: theta,
                    interrogations: n,
                    spin_up: (p * n as f64).round() as u64,
                }
            })
            .collect();
        EchoRecord { points, seed: 0 }
    }

    /// Record whose fractions are exact (denominator 10^12 keeps them
    /// representable to ~1e-13): used for exact-recovery tests.
    fn exact_record(a1: f64, a2: f64, phi: f64, angles: &[f64]) -> EchoRecord {
        noiseless_record(a1, a2, phi, angles, 1_000_000_000_000)
    }

    #[test]
    fn fringe_fit_recovers_noiseless_parameters() {
        let angles: Vec<f64> = (0..100).map(|k| 2.0 * PI * k as f64 / 100.0).collect();
        let rec = exact_record(0.31, 0.44, 0.3, &angles);
        let fit = fit_fringe(&rec).unwrap();
        assert!((fit.a1 - 0.31).abs() < 1e-9, "{}", fit.a1);
        assert!((fit.a2 - 0.44).abs() < 1e-9, "{}", fit.a2);
        assert!((fit.phase.phi - 0.3).abs() < 1e-9, "{}", fit.phase.phi);
    }

    #[test]
    fn fringe_fit_rejects_degenerate_angles() {
        let rec = exact_record(0.31, 0.44, 0.0, &[0.0, 0.1, 0.2, 0.3]);
        assert!(matches!(fit_fringe(&rec), Err(Error::RankDeficient { .. })));
        let rec = exact_record(0.31, 0.44, 0.0, &[0.0, 2.0, 4.0]);
        assert!(matches!(fit_fringe(&rec), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn fringe_fit_flags_constant_data() {
        let points = (0..8)
            .map(|k| EchoPoint {
                angle: k as f64,
                interrogations: 100,
                spin_up: 100,
            })
            .collect();
        let rec = EchoRecord { points, seed: 0 };
        assert!(matches!(
            fit_fringe(&rec),
            Err(Error::DegenerateFringe { .. })
        ));
    }

    #[test]
    fn signal_of_reference_probabilities() {
        // phi = 0 with A1 = 0.31, A2 = 0.44: (0.75, 0.44, 0.13) -> S = 0.5.
        let s = three_point_signal(0.75, 0.44, 0.13).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
        assert_eq!(phase_from_signal(0.5), 0.0);
        // phi = pi/4: p_half = p_pi, S = 0, phi back = pi/4.
        let fringe = FringeParams::new(0.31, 0.44).unwrap();
        let p0 = echo_probability(0.0, PI / 4.0, &fringe);
        let ph = echo_probability(FRAC_PI_2, PI / 4.0, &fringe);
        let ppi = echo_probability(PI, PI / 4.0, &fringe);
        assert!((ph - ppi).abs() < 1e-15);
        let s = three_point_signal(p0, ph, ppi).unwrap();
        assert!(s.abs() < 1e-14);
        assert!((phase_from_signal(s) - PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn signal_rejects_contrast_collapse() {
        assert!(matches!(
            three_point_signal(0.4, 0.3, 0.4),
            Err(Error::ContrastCollapse { .. })
        ));
    }

    #[test]
    fn three_point_round_trip_is_exact() {
        let fringe = FringeParams::new(0.31, 0.44).unwrap();
        for k in 0..100 {
            let phi = -1.5 + 3.0 * k as f64 / 99.0;
            let p0 = echo_probability(0.0, phi, &fringe);
            let ph = echo_probability(FRAC_PI_2, phi, &fringe);
            let ppi = echo_probability(PI, phi, &fringe);
            let back = phase_from_signal(three_point_signal(p0, ph, ppi).unwrap());
            assert!((back - phi).abs() < 1e-12, "phi={phi} back={back}");
        }
    }

    #[test]
    fn shot_noise_reference_constant() {
        // A1 = 0.31, A2 = 0.44, phi = 0: sigma * sqrt(N) = 1.8292.
        let fringe = FringeParams::new(0.31, 0.44).unwrap();
        for n in [1u64, 200, 10_000] {
            let sigma = shot_noise_sigma(&fringe, 0.0, n).unwrap();
            let c = sigma * (n as f64).sqrt();
            assert!((c - 1.8292).abs() < 1e-3, "N={n}: {c}");
        }
    }

    #[test]
    fn shot_noise_perfect_contrast() {
        // A1 = A2 = 0.5 at phi = 0: p(0) and p(pi) carry no variance and
        // the limit is exactly 1/sqrt(N).
        let fringe = FringeParams::new(0.5, 0.5).unwrap();
        let sigma = shot_noise_sigma(&fringe, 0.0, 400).unwrap();
        assert!((sigma - 0.05).abs() < 1e-12, "{sigma}");
    }

    #[test]
    fn shot_noise_collapses_at_quadrature_with_perfect_contrast() {
        // phi = pi/2 with A1 = A2 = 1/2 makes p(0) = p(pi) = 1/2: the
        // three-point denominator vanishes before any variance is computed.
        let fringe = FringeParams::new(0.5, 0.5).unwrap();
        assert!(matches!(
            shot_noise_sigma(&fringe, FRAC_PI_2, 100),
            Err(Error::ContrastCollapse { .. })
        ));
    }

    #[test]
    fn three_point_estimate_matches_fringe_fit_noiseless() {
        let angles = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
        for k in 0..50 {
            let phi = -1.55 + 3.1 * (k as f64 + 0.5) / 50.0;
            let rec = exact_record(0.31, 0.44, phi, &angles);
            let tp = three_point_estimate(&rec).unwrap();
            let ff = fit_fringe(&rec).unwrap();
            assert!(
                (tp.phi - ff.phase.phi).abs() < 1e-9,
                "phi={phi}: {} vs {}",
                tp.phi,
                ff.phase.phi
            );
        }
    }

    #[test]
    fn gradient_fit_two_exact_points() {
        // Noiseless phases from g = 1 mT/m convert back exactly.
        let g = 1e-3;
        let mk = |integral: f64| {
            (
                integral,
                PhaseEstimate {
                    phi: ZEEMAN_PHASE_RATE * g * integral,
                    sigma: 0.01,
                    method: EstimationMethod::ThreePoint,
                    n_total: 600,
                },
            )
        };
        let fit = gradient_fit(&[mk(1e-8), mk(3e-8)]).unwrap();
        assert!((fit.gradient / g - 1.0).abs() < 1e-12, "{}", fit.gradient);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn gradient_fit_rejects_identical_integrals() {
        let est = PhaseEstimate {
            phi: 0.1,
            sigma: 0.01,
            method: EstimationMethod::ThreePoint,
            n_total: 600,
        };
        assert!(matches!(
            gradient_fit(&[(1e-8, est), (1e-8, est)]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn unwrap_restores_a_growing_ramp() {
        let truth: Vec<f64> = (0..12).map(|k| 0.8 * k as f64).collect();
        let wrapped: Vec<f64> = truth
            .iter()
            .map(|p| {
                let mut v = *p;
                while v > PI {
                    v -= 2.0 * PI;
                }
                v
            })
            .collect();
        let unwrapped = unwrap_phases(&wrapped);
        for (u, t) in unwrapped.iter().zip(truth.iter()) {
            assert!((u - t).abs() < 1e-12);
        }
    }

    #[test]
    fn running_mean_constant_sequence() {
        let series = running_mean_series(&[0.4; 10]);
        for p in &series {
            assert!((p.mean - 0.4).abs() < 1e-15);
            assert!(p.stderr.abs() < 1e-12);
        }
    }

    #[test]
    fn running_mean_error_shrinks_like_sqrt_k() {
        // Deterministic pseudo-noise via the counter RNG.
        let rng = crate::rng::CounterRng::new(31);
        let xs: Vec<f64> = (0..4000).map(|c| rng.normal_at(c)).collect();
        let series = running_mean_series(&xs);
        let e100 = series[99].stderr;
        let e400 = series[399].stderr;
        // ratio should be about sqrt(100/400) = 0.5
        assert!((e400 / e100 - 0.5).abs() < 0.15, "{}", e400 / e100);
    }

    #[test]
    fn allan_white_noise_normalization() {
        let rng = crate::rng::CounterRng::new(77);
        let s = 0.13;
        let xs: Vec<f64> = (0..20_000).map(|c| s * rng.normal_at(c)).collect();
        let series = allan_deviation(&xs, &[1]).unwrap();
        let dev = series.points[0].deviation;
        assert!((dev / s - 1.0).abs() < 0.02, "{dev}");
    }

    #[test]
    fn allan_omits_oversized_blocks() {
        let xs = vec![0.0; 10];
        let series = allan_deviation(&xs, &[1, 2, 5, 6, 20]).unwrap();
        assert_eq!(series.omitted, vec![6, 20]);
        assert_eq!(series.points.len(), 3);
    }

    #[test]
    fn relative_field_reference_case() {
        // 7 nT over 19 um at B0 = 0.7 mT -> 1e-5.
        let d = 19e-6;
        let big_t = 400e-6;
        let integral = 2.0 * d * big_t / PI;
        let g: f64 = 7e-9 / 19e-6;
        let phi = ZEEMAN_PHASE_RATE * g * integral;
        let rel = phase_to_relative_field(phi, integral, d, 0.7e-3).unwrap();
        assert!((rel - 1e-5).abs() < 1e-8, "{rel}");
        assert_eq!(
            phase_to_relative_field(0.0, integral, d, 0.7e-3).unwrap(),
            0.0
        );
        assert!(phase_to_relative_field(0.1, 0.0, d, 0.7e-3).is_err());
    }

    #[test]
    fn weighted_fit_reduces_to_ordinary_for_equal_sigmas() {
        let xs = [1e-8, 2e-8, 3e-8, 4e-8];
        let ys = [0.1, 0.25, 0.28, 0.41];
        let pts: Vec<(f64, PhaseEstimate)> = xs
            .iter()
            .zip(ys.iter())
            .map(|(&x, &y)| {
                (
                    x,
                    PhaseEstimate {
                        phi: y,
                        sigma: 0.02,
                        method: EstimationMethod::ThreePoint,
                        n_total: 600,
                    },
                )
            })
            .collect();
        let fit = gradient_fit(&pts).unwrap();
        // Ordinary least squares by hand.
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| (x - mx) * (y - my))
            .sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!((fit.slope / slope - 1.0).abs() < 1e-12);
    }
}
