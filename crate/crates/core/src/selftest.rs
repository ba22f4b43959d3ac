//! Built-in oracle checks, runnable from the CLI on a pristine checkout.
//!
//! Each check compares an operation against an independent route: a closed
//! form, a dense-grid scan, a higher-order stencil, or a Monte Carlo
//! statistic. The same contracts are enforced (more extensively) by the
//! test suite; this battery exists so a binary install can prove its
//! numerics without the source tree.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::calibration::{
    closed_loop_calibrate, coherence_estimate, solve_zero_gradient, CalibrationMeasurement,
    CoherenceMode, CoilModel,
};
use crate::constants::{CA40_MASS, ELEMENTARY_CHARGE, ZEEMAN_PHASE_RATE};
use crate::estimation::{
    allan_deviation, fit_fringe, gradient_fit, phase_from_signal, phase_to_relative_field,
    running_mean_series, shot_noise_sigma, three_point_signal, EstimationMethod, PhaseEstimate,
};
use crate::rng::CounterRng;
use crate::shape::{ShapeFactorTable, SyntheticShape};
use crate::spin::{
    accumulated_phase, echo_probability, run_echo_experiment, simulate_interrogations,
    zeeman_splitting, EchoPoint, EchoRecord, FieldModel, FringeParams,
};
use crate::trap::{
    adiabaticity_ratio, axial_frequency, compute_trajectory, displacement_time_integral,
    find_minimum, potential_at, tune_v2_peak, waveform_voltage, Trajectory, TransportScenario,
    WaveformKind, MINIMIZER_TOL,
};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn() -> Result<String, String>;

fn run_check(name: &'static str, f: CheckFn) -> CheckResult {
    match f() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

macro_rules! fail {
    ($($arg:tt)*) => { return Err(format!($($arg)*)) };
}

fn e2s(e: crate::Error) -> String {
    e.to_string()
}

fn default_table() -> Result<ShapeFactorTable, String> {
    ShapeFactorTable::synthetic(&SyntheticShape::default()).map_err(e2s)
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

fn sine_trajectory(d: f64, duration: f64, n: usize) -> Trajectory {
    let times: Vec<f64> = (0..=n).map(|k| duration * k as f64 / n as f64).collect();
    let xs: Vec<f64> = times
        .iter()
        .map(|t| d * (PI * t / duration).sin())
        .collect();
    Trajectory::from_samples(times, xs).unwrap()
}

fn default_fringe() -> FringeParams {
    FringeParams::new(0.31, 0.44).unwrap()
}

/// Run the whole battery.
pub fn run_all() -> Vec<CheckResult> {
    let checks: &[(&'static str, CheckFn)] = &[
        ("trap-potential-superposition", potential_superposition),
        ("trap-potential-linearity", potential_linearity),
        ("trap-potential-dense-grid-oracle", potential_dense_grid),
        ("trap-waveform-endpoints", waveform_endpoints),
        ("trap-minimizer-symmetric", minimizer_symmetric),
        ("trap-minimizer-midpoint", minimizer_midpoint),
        ("trap-minimizer-grid-oracle", minimizer_grid_oracle),
        ("trap-frequency-analytic-well", frequency_analytic_well),
        ("trap-frequency-default-config", frequency_default_config),
        ("trap-curvature-stencil-oracle", curvature_stencil_oracle),
        ("trap-trajectory-no-drive", trajectory_no_drive),
        ("trap-trajectory-140um-roundtrip", trajectory_140um),
        ("trap-trajectory-refinement", trajectory_refinement),
        ("trap-integral-constant-zero", integral_constant_zero),
        ("trap-integral-sine-closed-form", integral_sine_closed_form),
        ("trap-integral-simpson-convergence", integral_convergence),
        ("trap-adiabaticity-ratio", adiabaticity_reference),
        ("spin-zeeman-reference", zeeman_reference),
        ("spin-phase-zero-gradient", phase_zero_gradient),
        ("spin-phase-closed-form", phase_closed_form),
        ("spin-phase-quadrature-oracle", phase_quadrature_oracle),
        ("spin-fringe-reference-points", fringe_reference_points),
        ("spin-sampler-degenerate", sampler_degenerate),
        ("spin-sampler-variance", sampler_variance),
        ("spin-record-determinism", record_determinism),
        ("est-fringe-fit-noiseless", fringe_fit_noiseless),
        ("est-three-point-reference", three_point_reference),
        ("est-three-point-roundtrip", three_point_roundtrip),
        ("est-signal-affine-invariance", signal_affine_invariance),
        ("est-shot-noise-reference", shot_noise_reference),
        ("est-shot-noise-perfect-contrast", shot_noise_perfect),
        ("est-shot-noise-monte-carlo", shot_noise_monte_carlo),
        ("est-gradient-two-point", gradient_two_point),
        ("est-running-mean-constant", running_mean_constant),
        ("est-allan-white-noise", allan_white_noise),
        ("est-relative-field-reference", relative_field_reference),
        ("cal-fit-roundtrip", cal_fit_roundtrip),
        ("cal-solve-reference-currents", cal_solve_reference),
        ("cal-closed-loop-linear", cal_closed_loop_linear),
        ("cal-coherence-scale", cal_coherence_scale),
    ];
    checks.iter().map(|(n, f)| run_check(n, *f)).collect()
}

fn potential_superposition() -> Result<String, String> {
    let table = default_table()?;
    let v = potential_at(0.0, -6.0, 0.0, &table).map_err(e2s)?;
    if (v + 6.0).abs() > 1e-6 {
        fail!("V at segment-0 center {v}, expected -6");
    }
    let z = potential_at(100e-6, 0.0, 0.0, &table).map_err(e2s)?;
    if z != 0.0 {
        fail!("zero voltages gave {z}");
    }
    Ok(format!("V(center) = {v:.9} V"))
}

fn potential_linearity() -> Result<String, String> {
    let table = default_table()?;
    let base = potential_at(75e-6, -6.0, -3.0, &table).map_err(e2s)?;
    let scaled = potential_at(75e-6, -15.0, -7.5, &table).map_err(e2s)?;
    let rel = (scaled - 2.5 * base).abs() / base.abs();
    if rel > 1e-12 {
        fail!("linearity violated: rel {rel:.2e}");
    }
    Ok(format!("scaling residual {rel:.1e}"))
}

fn potential_dense_grid() -> Result<String, String> {
    // Independent interpolants at 10x the sampling density.
    let coarse = ShapeFactorTable::synthetic(&SyntheticShape {
        samples: 501,
        ..SyntheticShape::default()
    })
    .map_err(e2s)?;
    let dense = ShapeFactorTable::synthetic(&SyntheticShape {
        samples: 5001,
        ..SyntheticShape::default()
    })
    .map_err(e2s)?;
    let x = 225e-6; // midway between the segment centers
    let a = potential_at(x, -6.0, -3.0, &coarse).map_err(e2s)?;
    let b = potential_at(x, -6.0, -3.0, &dense).map_err(e2s)?;
    if (a - b).abs() > 1e-6 {
        fail!("coarse {a} vs dense {b}");
    }
    Ok(format!("|coarse - dense| = {:.2e} V", (a - b).abs()))
}

fn waveform_endpoints() -> Result<String, String> {
    let sc = default_scenario();
    let v0 = waveform_voltage(0.0, &sc).map_err(e2s)?;
    let vt = waveform_voltage(sc.duration, &sc).map_err(e2s)?;
    if v0 != 0.0 || vt != 0.0 {
        fail!("endpoints not exactly zero: {v0}, {vt}");
    }
    let peak = waveform_voltage(sc.duration / 2.0, &sc).map_err(e2s)?;
    if (peak - sc.v2_peak).abs() > 1e-12 {
        fail!("peak {peak} vs {}", sc.v2_peak);
    }
    let quarter = waveform_voltage(sc.duration / 4.0, &sc).map_err(e2s)?;
    let expect = -3.2766 * FRAC_PI_4.sin(); // -2.3169...: v2_peak * sin(pi/4)
    if (quarter - expect).abs() > 1e-12 {
        fail!("quarter-period {quarter} vs {expect}");
    }
    Ok(format!("V2(T/4) = {quarter:.6} V"))
}

fn minimizer_symmetric() -> Result<String, String> {
    let table = default_table()?;
    let x = find_minimum(-6.0, 0.0, &table, (-200e-6, 200e-6)).map_err(e2s)?;
    if x.abs() > 2.0 * MINIMIZER_TOL {
        fail!("minimum at {x} m, expected 0");
    }
    Ok(format!("|x_min| = {:.2e} m", x.abs()))
}

fn minimizer_midpoint() -> Result<String, String> {
    let table = default_table()?;
    let x = find_minimum(-6.0, -6.0, &table, (0.0, 450e-6)).map_err(e2s)?;
    if (x - 225e-6).abs() > 1e-9 {
        fail!("equal-voltage minimum at {x}, expected 225 um");
    }
    Ok(format!("x_min = {:.6} um", x * 1e6))
}

fn minimizer_grid_oracle() -> Result<String, String> {
    let table = ShapeFactorTable::synthetic(&SyntheticShape {
        centers: vec![0.0, 380e-6],
        width: 300e-6,
        samples: 1501,
        margin_widths: 2.5,
    })
    .map_err(e2s)?;
    let (v1, v2) = (-6.0, -2.0);
    // Exhaustive scan: coarse pass over the full bracket, then a
    // one-million-point grid around the coarse argmin.
    let bracket = (-150e-6, 250e-6);
    let coarse_argmin = grid_argmin(&table, v1, v2, bracket.0, bracket.1, 4001)?;
    let fine_lo = coarse_argmin - 2e-6;
    let fine_hi = coarse_argmin + 2e-6;
    let grid = grid_argmin(&table, v1, v2, fine_lo, fine_hi, 1_000_001)?;
    let bisected = find_minimum(v1, v2, &table, bracket).map_err(e2s)?;
    let diff = (grid - bisected).abs();
    if diff > 1e-9 {
        fail!("grid argmin {grid} vs bisection {bisected}: diff {diff:.2e} m");
    }
    Ok(format!("grid vs bisection diff {:.2e} um", diff * 1e6))
}

fn grid_argmin(
    table: &ShapeFactorTable,
    v1: f64,
    v2: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<f64, String> {
    let mut best = (f64::INFINITY, lo);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let v = potential_at(x, v1, v2, table).map_err(e2s)?;
        if v < best.0 {
            best = (v, x);
        }
    }
    Ok(best.1)
}

fn frequency_analytic_well() -> Result<String, String> {
    // Quadratic shape 1 - x^2/(2L^2): curvature -1/L^2 exactly.
    let l = 300e-6;
    let n = 401;
    let positions: Vec<f64> = (0..n)
        .map(|i| -l + 2.0 * l * i as f64 / (n - 1) as f64)
        .collect();
    let quad: Vec<f64> = positions
        .iter()
        .map(|x| 1.0 - x * x / (2.0 * l * l))
        .collect();
    let zero = vec![0.0; n];
    let table =
        ShapeFactorTable::new(vec![(positions.clone(), quad), (positions, zero)]).map_err(e2s)?;
    let f = axial_frequency(-6.0, 0.0, &table, 0.0, CA40_MASS, ELEMENTARY_CHARGE).map_err(e2s)?;
    let expect = (ELEMENTARY_CHARGE * 6.0 / CA40_MASS).sqrt() / l / (2.0 * PI);
    let rel = (f / expect - 1.0).abs();
    if rel > 1e-6 {
        fail!("f = {f} Hz vs analytic {expect} Hz (rel {rel:.2e})");
    }
    Ok(format!("rel error {rel:.2e}"))
}

fn frequency_default_config() -> Result<String, String> {
    let table = default_table()?;
    let x0 = find_minimum(-6.0, 0.0, &table, (-100e-6, 100e-6)).map_err(e2s)?;
    let f = axial_frequency(-6.0, 0.0, &table, x0, CA40_MASS, ELEMENTARY_CHARGE).map_err(e2s)?;
    if (f - 1.35e6).abs() > 0.01 * 1.35e6 {
        fail!("axial frequency {f} Hz not within 1% of 1.35 MHz");
    }
    Ok(format!("f = {:.4} MHz", f / 1e6))
}

fn curvature_stencil_oracle() -> Result<String, String> {
    let table = default_table()?;
    let x0 = find_minimum(-6.0, -1.5, &table, (-100e-6, 300e-6)).map_err(e2s)?;
    let f = axial_frequency(-6.0, -1.5, &table, x0, CA40_MASS, ELEMENTARY_CHARGE).map_err(e2s)?;
    let curvature = (2.0 * PI * f).powi(2) * CA40_MASS / ELEMENTARY_CHARGE;
    // Five-point stencil at h = 50 nm.
    let h = 5e-8;
    let v = |x: f64| potential_at(x, -6.0, -1.5, &table).map_err(e2s);
    let stencil = (-v(x0 - 2.0 * h)? + 16.0 * v(x0 - h)? - 30.0 * v(x0)? + 16.0 * v(x0 + h)?
        - v(x0 + 2.0 * h)?)
        / (12.0 * h * h);
    let rel = (curvature / stencil - 1.0).abs();
    if rel > 1e-4 {
        fail!("curvature {curvature} vs stencil {stencil} (rel {rel:.2e})");
    }
    Ok(format!("rel difference {rel:.2e}"))
}

fn trajectory_no_drive() -> Result<String, String> {
    let table = default_table()?;
    let sc = TransportScenario {
        v2_peak: 0.0,
        samples: 64,
        ..default_scenario()
    };
    let traj = compute_trajectory(&sc, &table).map_err(e2s)?;
    if traj.max_displacement() > 2.0 * MINIMIZER_TOL {
        fail!("drifted by {} m with no drive", traj.max_displacement());
    }
    Ok(format!("max |dx| = {:.2e} m", traj.max_displacement()))
}

fn trajectory_140um() -> Result<String, String> {
    let table = default_table()?;
    let traj = compute_trajectory(&default_scenario(), &table).map_err(e2s)?;
    let d = traj.max_displacement();
    if (d - 140e-6).abs() > 1.4e-6 {
        fail!("max displacement {} um", d * 1e6);
    }
    let n = traj.positions().len() - 1;
    let resid = (traj.positions()[n] - traj.positions()[0]).abs();
    if resid > MINIMIZER_TOL {
        fail!("round trip residual {resid} m");
    }
    Ok(format!(
        "max displacement {:.3} um, return residual {:.1e} m",
        d * 1e6,
        resid
    ))
}

fn trajectory_refinement() -> Result<String, String> {
    let table = default_table()?;
    let coarse = compute_trajectory(
        &TransportScenario {
            samples: 200,
            ..default_scenario()
        },
        &table,
    )
    .map_err(e2s)?;
    let fine = compute_trajectory(
        &TransportScenario {
            samples: 400,
            ..default_scenario()
        },
        &table,
    )
    .map_err(e2s)?;
    let mut worst: f64 = 0.0;
    for k in 0..coarse.positions().len() {
        worst = worst.max((coarse.positions()[k] - fine.positions()[2 * k]).abs());
    }
    if worst > MINIMIZER_TOL {
        fail!("refinement moved a shared sample by {worst:.2e} m");
    }
    Ok(format!("max shared-sample shift {worst:.2e} m"))
}

fn integral_constant_zero() -> Result<String, String> {
    let times: Vec<f64> = (0..=64).map(|k| k as f64 * 1e-6).collect();
    let traj = Trajectory::from_samples(times, vec![3e-6; 65]).unwrap();
    let integral = displacement_time_integral(&traj).map_err(e2s)?;
    if integral != 0.0 {
        fail!("constant trajectory integrated to {integral}");
    }
    Ok("integral = 0".into())
}

fn integral_sine_closed_form() -> Result<String, String> {
    let traj = sine_trajectory(100e-6, 0.4e-3, 400);
    let got = displacement_time_integral(&traj).map_err(e2s)?;
    let expect = 2.0 * 100e-6 * 0.4e-3 / PI;
    let rel = (got / expect - 1.0).abs();
    if rel > 1e-6 {
        fail!("integral {got} vs 2dT/pi = {expect} (rel {rel:.2e})");
    }
    Ok(format!("{:.5} um ms, rel error {rel:.1e}", got * 1e9))
}

fn integral_convergence() -> Result<String, String> {
    let exact = 2.0 * 100e-6 * 0.4e-3 / PI;
    let e1 = displacement_time_integral(&sine_trajectory(100e-6, 0.4e-3, 64)).map_err(e2s)? - exact;
    let e2 =
        displacement_time_integral(&sine_trajectory(100e-6, 0.4e-3, 128)).map_err(e2s)? - exact;
    let ratio = (e1 / e2).abs();
    if !(12.0..=20.0).contains(&ratio) {
        fail!("halving the step scaled the error by {ratio:.2}, expected ~16");
    }
    Ok(format!("error ratio {ratio:.2} (expected ~16)"))
}

fn adiabaticity_reference() -> Result<String, String> {
    let ratio = adiabaticity_ratio(&default_scenario(), 1.35e6);
    if (ratio - 540.0).abs() > 1e-9 {
        fail!("T*f = {ratio}, expected 540");
    }
    Ok("400 us x 1.35 MHz = 540".into())
}

fn zeeman_reference() -> Result<String, String> {
    if zeeman_splitting(0.0).map_err(e2s)? != 0.0 {
        fail!("zero field gave a nonzero splitting");
    }
    let f = zeeman_splitting(0.7e-3).map_err(e2s)?;
    if (f / 1.95947e7 - 1.0).abs() > 1e-4 {
        fail!("0.7 mT gave {f} Hz, expected 19.5947 MHz");
    }
    let g = zeeman_splitting(1.0).map_err(e2s)?;
    if (g / 2.79925e10 - 1.0).abs() > 1e-4 {
        fail!("1 T gave {g} Hz, expected 27.99 GHz");
    }
    Ok(format!("0.7 mT -> {:.4} MHz", f / 1e6))
}

fn phase_zero_gradient() -> Result<String, String> {
    let traj = sine_trajectory(100e-6, 0.4e-3, 200);
    let field = FieldModel::new(0.7e-3, 0.0).map_err(e2s)?;
    let phi = accumulated_phase(&traj, &field).map_err(e2s)?;
    if phi != 0.0 {
        fail!("zero gradient accumulated {phi} rad");
    }
    Ok("phi = 0".into())
}

fn phase_closed_form() -> Result<String, String> {
    let traj = sine_trajectory(100e-6, 0.4e-3, 4000);
    let field = FieldModel::new(0.7e-3, 1e-3).map_err(e2s)?;
    let phi = accumulated_phase(&traj, &field).map_err(e2s)?;
    let expect = ZEEMAN_PHASE_RATE * 1e-3 * 2.0 * 100e-6 * 0.4e-3 / PI; // 4.4788 rad
    let rel = (phi / expect - 1.0).abs();
    if rel > 1e-6 {
        fail!("phi = {phi} vs closed form {expect}");
    }
    Ok(format!("phi = {phi:.4} rad"))
}

fn phase_quadrature_oracle() -> Result<String, String> {
    // Simpson route (accumulated_phase) against a trapezoid quadrature of
    // the same transport samples.
    let table = default_table()?;
    let v2 = tune_v2_peak(&table, -6.0, 19e-6).map_err(e2s)?;
    let sc = TransportScenario {
        v2_peak: v2,
        ..default_scenario()
    };
    let traj = compute_trajectory(&sc, &table).map_err(e2s)?;
    let g = 7e-9 / 19e-6;
    let field = FieldModel::new(0.7e-3, g).map_err(e2s)?;
    let phi = accumulated_phase(&traj, &field).map_err(e2s)?;
    let xs = traj.positions();
    let ts = traj.times();
    let mut trapz = 0.0;
    for k in 1..ts.len() {
        trapz += 0.5 * ((xs[k] - xs[0]) + (xs[k - 1] - xs[0])) * (ts[k] - ts[k - 1]);
    }
    let phi_trapz = ZEEMAN_PHASE_RATE * g * trapz;
    let rel = (phi / phi_trapz - 1.0).abs();
    if rel > 2e-5 {
        fail!("Simpson {phi} vs trapezoid {phi_trapz} (rel {rel:.2e})");
    }
    Ok(format!("phi = {phi:.5} rad, route difference {rel:.1e}"))
}

fn fringe_reference_points() -> Result<String, String> {
    let fringe = default_fringe();
    let top = echo_probability(0.0, 0.0, &fringe);
    let bottom = echo_probability(PI, 0.0, &fringe);
    if (top - 0.75).abs() > 1e-12 || (bottom - 0.13).abs() > 1e-12 {
        fail!("fringe extremes ({top}, {bottom}) vs (0.75, 0.13)");
    }
    let shifted = echo_probability(FRAC_PI_2, FRAC_PI_2, &fringe);
    if (shifted - (0.44 - 0.31)).abs() > 1e-12 {
        fail!("theta=pi/2, phi=pi/2 gave {shifted}");
    }
    Ok("fringe spans 0.13 to 0.75".into())
}

fn sampler_degenerate() -> Result<String, String> {
    if simulate_interrogations(0.0, 1000, 5).map_err(e2s)? != 0 {
        fail!("p=0 produced spin-up counts");
    }
    if simulate_interrogations(1.0, 1000, 5).map_err(e2s)? != 1000 {
        fail!("p=1 lost spin-up counts");
    }
    Ok("p=0 -> 0, p=1 -> N".into())
}

fn sampler_variance() -> Result<String, String> {
    let (p, n, trials) = (0.75, 200u64, 10_000u64);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for s in 0..trials {
        let f = simulate_interrogations(p, n, s).map_err(e2s)? as f64 / n as f64;
        sum += f;
        sum_sq += f * f;
    }
    let mean = sum / trials as f64;
    let var = (sum_sq - sum * sum / trials as f64) / (trials - 1) as f64;
    let expect = p * (1.0 - p) / n as f64;
    let rel = (var / expect - 1.0).abs();
    if rel > 0.05 {
        fail!("variance {var:.3e} vs binomial {expect:.3e} (rel {rel:.3})");
    }
    if (mean - p).abs() > 0.002 {
        fail!("mean {mean} vs {p}");
    }
    Ok(format!("var/expected = {:.3}", var / expect))
}

fn record_determinism() -> Result<String, String> {
    let traj = sine_trajectory(19e-6, 0.4e-3, 128);
    let field = FieldModel::new(0.7e-3, 3.7e-4).map_err(e2s)?;
    let fringe = default_fringe();
    let angles: Vec<f64> = (0..100).map(|k| 2.0 * PI * k as f64 / 100.0).collect();
    let a = run_echo_experiment(&traj, &field, &fringe, &angles, 200, 11).map_err(e2s)?;
    let b = run_echo_experiment(&traj, &field, &fringe, &angles, 200, 11).map_err(e2s)?;
    if a != b {
        fail!("same seed produced different records");
    }
    Ok(format!(
        "{} angles x 200 interrogations replayed bit-identically",
        a.points.len()
    ))
}

fn fringe_fit_noiseless() -> Result<String, String> {
    let fringe = default_fringe();
    let angles: Vec<f64> = (0..100).map(|k| 2.0 * PI * k as f64 / 100.0).collect();
    let n = 1_000_000_000_000u64;
    let points = angles
        .iter()
        .map(|&theta| EchoPoint {
            angle: theta,
            interrogations: n,
            spin_up: (echo_probability(theta, 0.3, &fringe) * n as f64).round() as u64,
        })
        .collect();
    let fit = fit_fringe(&EchoRecord { points, seed: 0 }).map_err(e2s)?;
    let err = (fit.phase.phi - 0.3)
        .abs()
        .max((fit.a1 - 0.31).abs())
        .max((fit.a2 - 0.44).abs());
    if err > 1e-9 {
        fail!("noiseless recovery error {err:.2e}");
    }
    Ok(format!("worst parameter error {err:.1e}"))
}

fn three_point_reference() -> Result<String, String> {
    let s = three_point_signal(0.75, 0.44, 0.13).map_err(e2s)?;
    if (s - 0.5).abs() > 1e-15 || phase_from_signal(s) != 0.0 {
        fail!("phi=0 probabilities gave S={s}");
    }
    let fringe = default_fringe();
    let s2 = three_point_signal(
        echo_probability(0.0, FRAC_PI_4, &fringe),
        echo_probability(FRAC_PI_2, FRAC_PI_4, &fringe),
        echo_probability(PI, FRAC_PI_4, &fringe),
    )
    .map_err(e2s)?;
    if s2.abs() > 1e-14 || (phase_from_signal(s2) - FRAC_PI_4).abs() > 1e-14 {
        fail!("phi=pi/4 gave S={s2}");
    }
    if three_point_signal(0.4, 0.3, 0.4).is_ok() {
        fail!("contrast collapse not detected");
    }
    Ok("S(0) = 1/2, S(pi/4) = 0, collapse detected".into())
}

fn three_point_roundtrip() -> Result<String, String> {
    let fringe = default_fringe();
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let phi = -1.5 + 3.0 * k as f64 / 999.0;
        let s = three_point_signal(
            echo_probability(0.0, phi, &fringe),
            echo_probability(FRAC_PI_2, phi, &fringe),
            echo_probability(PI, phi, &fringe),
        )
        .map_err(e2s)?;
        worst = worst.max((phase_from_signal(s) - phi).abs());
    }
    if worst > 1e-12 {
        fail!("round-trip error {worst:.2e}");
    }
    Ok(format!("worst |round trip - phi| = {worst:.1e}"))
}

fn signal_affine_invariance() -> Result<String, String> {
    let fringe = default_fringe();
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let phi = -1.4 + 2.8 * k as f64 / 99.0;
        let p0 = echo_probability(0.0, phi, &fringe);
        let ph = echo_probability(FRAC_PI_2, phi, &fringe);
        let ppi = echo_probability(PI, phi, &fringe);
        let s = three_point_signal(p0, ph, ppi).map_err(e2s)?;
        for (a, b) in [(0.5, 0.1), (1.3, -0.05), (0.17, 0.4)] {
            let s2 = three_point_signal(a * p0 + b, a * ph + b, a * ppi + b).map_err(e2s)?;
            worst = worst.max((s2 - s).abs());
        }
    }
    if worst > 1e-12 {
        fail!("affine transform moved S by {worst:.2e}");
    }
    Ok(format!("worst |S' - S| = {worst:.1e}"))
}

fn shot_noise_reference() -> Result<String, String> {
    let sigma = shot_noise_sigma(&default_fringe(), 0.0, 1).map_err(e2s)?;
    if (sigma - 1.81).abs() > 0.04 {
        fail!("sigma*sqrt(N) = {sigma:.4}, expected 1.81 +/- 0.04");
    }
    Ok(format!("sigma*sqrt(N) = {sigma:.4} rad"))
}

fn shot_noise_perfect() -> Result<String, String> {
    let fringe = FringeParams::new(0.5, 0.5).map_err(e2s)?;
    let sigma = shot_noise_sigma(&fringe, 0.0, 100).map_err(e2s)?;
    if (sigma - 0.1).abs() > 1e-12 {
        fail!("perfect contrast sigma {sigma} vs 0.1");
    }
    Ok("perfect contrast: 1.00/sqrt(N)".into())
}

fn shot_noise_monte_carlo() -> Result<String, String> {
    let fringe = default_fringe();
    let n = 200u64;
    let trials = 10_000u64;
    let root = CounterRng::new(1717);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for t in 0..trials {
        let stream = root.derive(t);
        let mut ps = [0.0; 3];
        for (i, theta) in [0.0, FRAC_PI_2, PI].iter().enumerate() {
            let p = echo_probability(*theta, 0.0, &fringe);
            let k = crate::rng::binomial(&stream.derive(i as u64), n, p);
            ps[i] = k as f64 / n as f64;
        }
        let phi = phase_from_signal(three_point_signal(ps[0], ps[1], ps[2]).map_err(e2s)?);
        sum += phi;
        sum_sq += phi * phi;
    }
    let mean = sum / trials as f64;
    let std = ((sum_sq - sum * sum / trials as f64) / (trials - 1) as f64).sqrt();
    let expect = shot_noise_sigma(&fringe, 0.0, n).map_err(e2s)?;
    let rel = (std / expect - 1.0).abs();
    if rel > 0.05 {
        fail!("MC std {std:.5} vs propagated {expect:.5} (rel {rel:.3})");
    }
    if mean.abs() > 5.0 * expect / (trials as f64).sqrt() {
        fail!("MC mean {mean:.2e} biased");
    }
    Ok(format!("MC/theory = {:.3}", std / expect))
}

fn gradient_two_point() -> Result<String, String> {
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
    let fit = gradient_fit(&[mk(1e-8), mk(3e-8)]).map_err(e2s)?;
    let rel = (fit.gradient / g - 1.0).abs();
    if rel > 1e-12 {
        fail!("recovered {} T/m vs 1e-3 (rel {rel:.2e})", fit.gradient);
    }
    Ok(format!("gradient recovered to {rel:.1e} relative"))
}

fn running_mean_constant() -> Result<String, String> {
    let series = running_mean_series(&[0.37; 25]);
    for p in &series {
        if (p.mean - 0.37).abs() > 1e-15 || p.stderr != 0.0 {
            fail!("constant series: mean {} stderr {}", p.mean, p.stderr);
        }
    }
    Ok("constant means, zero error bars".into())
}

fn allan_white_noise() -> Result<String, String> {
    let rng = CounterRng::new(4242);
    let s = 0.129;
    let xs: Vec<f64> = (0..20_000).map(|c| s * rng.normal_at(c)).collect();
    let series = allan_deviation(&xs, &[1]).map_err(e2s)?;
    let dev = series.points[0].deviation;
    let rel = (dev / s - 1.0).abs();
    if rel > 0.02 {
        fail!("Allan at n=1 is {dev:.4} vs injected std {s}");
    }
    Ok(format!("sigma_A(1)/s = {:.3}", dev / s))
}

fn relative_field_reference() -> Result<String, String> {
    let d = 19e-6;
    let integral = 2.0 * d * 400e-6 / PI;
    let phi = ZEEMAN_PHASE_RATE * (7e-9 / 19e-6) * integral;
    let rel = phase_to_relative_field(phi, integral, d, 0.7e-3).map_err(e2s)?;
    if (rel - 1e-5).abs() > 1e-8 {
        fail!("7 nT / 0.7 mT mapped to {rel:.3e}");
    }
    Ok(format!("dB/B0 = {rel:.3e}"))
}

fn reference_coils() -> Result<CoilModel, String> {
    let a2 = 1.0e-3;
    CoilModel::new(
        0.0,
        (-a2 * 2.122 / 1.660, a2),
        0.0,
        (0.7e-3 / 3.782, 0.7e-3 / 3.782),
    )
    .map_err(e2s)
}

fn cal_fit_roundtrip() -> Result<String, String> {
    let truth = reference_coils()?;
    let mk = |i1: f64, i2: f64| {
        CalibrationMeasurement::new(
            i1,
            i2,
            truth.gradient_at(i1, i2),
            1e-7,
            truth.field_at(i1, i2),
        )
        .unwrap()
    };
    let fit =
        crate::calibration::fit_coil_model(&[mk(3.0, 1.0), mk(1.9, 1.9)], true).map_err(e2s)?;
    let rel = (fit.gradient_per_amp.0 / truth.gradient_per_amp.0 - 1.0)
        .abs()
        .max((fit.field_per_amp.1 / truth.field_per_amp.1 - 1.0).abs());
    if rel > 1e-12 {
        fail!("model coefficients off by {rel:.2e} relative");
    }
    Ok(format!("coefficients recovered to {rel:.1e}"))
}

fn cal_solve_reference() -> Result<String, String> {
    let model = reference_coils()?;
    let sol = solve_zero_gradient(&model, 0.7e-3).map_err(e2s)?;
    if (sol.i1 - 1.660).abs() > 1e-9 || (sol.i2 - 2.122).abs() > 1e-9 {
        fail!("currents ({}, {}) vs (1.660, 2.122)", sol.i1, sol.i2);
    }
    let residual = model.gradient_at(sol.i1, sol.i2).abs();
    if residual > 1e-12 {
        fail!("replugged gradient {residual:.2e} T/m");
    }
    Ok(format!(
        "I = ({:.6}, {:.6}) A, residual gradient {residual:.1e} T/m",
        sol.i1, sol.i2
    ))
}

fn cal_closed_loop_linear() -> Result<String, String> {
    let truth = reference_coils()?;
    let mk = |i1: f64, i2: f64| {
        CalibrationMeasurement::new(
            i1,
            i2,
            truth.gradient_at(i1, i2),
            1e-7,
            truth.field_at(i1, i2),
        )
        .unwrap()
    };
    let initial = [mk(3.0, 1.0), mk(1.9, 1.9)];
    let mut experiment = |i1: f64, i2: f64| -> crate::Result<(f64, f64, f64)> {
        Ok((truth.gradient_at(i1, i2), 1e-7, truth.field_at(i1, i2)))
    };
    let out =
        closed_loop_calibrate(&mut experiment, &initial, 0.7e-3, 1e-9, 10, true).map_err(e2s)?;
    if out.iterations != 1 {
        fail!("linear truth took {} iterations", out.iterations);
    }
    Ok("noiseless linear loop converged on the first pass".into())
}

fn cal_coherence_scale() -> Result<String, String> {
    let t = coherence_estimate(1.4e-6, 4e-6, CoherenceMode::DfsPair).map_err(e2s)?;
    if (t - 1.0153).abs() > 1e-3 {
        fail!("coherence {t} s, expected about 1.015 s");
    }
    let t2 = coherence_estimate(1.4e-6, 8e-6, CoherenceMode::DfsPair).map_err(e2s)?;
    if (t2 - t / 2.0).abs() > 1e-15 {
        fail!("doubling the separation gave {t2} s");
    }
    if coherence_estimate(0.0, 4e-6, CoherenceMode::DfsPair).map_err(e2s)? != f64::INFINITY {
        fail!("zero gradient should report unbounded coherence");
    }
    Ok(format!("T(1.4 uT/m, 4 um) = {t:.3} s"))
}
