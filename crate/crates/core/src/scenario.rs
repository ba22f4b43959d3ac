//! Named scenario runner.
//!
//! A scenario is a complete simulated measurement campaign: it builds the
//! trap and field models from the configuration, runs the echo experiments,
//! applies the estimation pipeline and assembles CSV outputs in memory.
//! Nothing is written to disk until a run has fully succeeded, so a failed
//! run leaves no partial outputs. Every output file starts with a comment
//! line recording the config hash and master seed, and every random stream
//! is derived from the master seed through a fixed hierarchy
//! (scenario → case/series → estimate → angle), which makes any scenario a
//! pure function of (config, seed).
//!
//! Simulated experiment wall time (detection time per interrogation) is
//! tracked for reporting and for the field-drift model; it is never slept.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::calibration::{
    closed_loop_calibrate, coherence_estimate, CalibrationMeasurement, CoherenceMode,
};
use crate::config::ScenarioConfig;
use crate::constants::{CA40_MASS, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};
use crate::estimation::{
    allan_deviation, fit_fringe, gradient_fit, phase_to_relative_field, running_mean_series,
    shot_noise_sigma, three_point_estimate, unwrap_phases, PhaseEstimate,
};
use crate::rng::CounterRng;
use crate::selftest;
use crate::shape::ShapeFactorTable;
use crate::spin::{run_echo_experiment_at, EchoRecord, ExperimentClock, FieldModel, FringeParams};
use crate::trap::{transport_summary, tune_v2_peak, TransportScenario, TransportSummary};

/// The scenarios the artifact knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Fig2GradientScan,
    Fig3aRunningMean,
    Fig3bAllan,
    Calibrate,
    Selftest,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Fig2GradientScan,
        Scenario::Fig3aRunningMean,
        Scenario::Fig3bAllan,
        Scenario::Calibrate,
        Scenario::Selftest,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "fig2-gradient-scan" => Ok(Self::Fig2GradientScan),
            "fig3a-running-mean" => Ok(Self::Fig3aRunningMean),
            "fig3b-allan" => Ok(Self::Fig3bAllan),
            "calibrate" => Ok(Self::Calibrate),
            "selftest" => Ok(Self::Selftest),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fig2GradientScan => "fig2-gradient-scan",
            Self::Fig3aRunningMean => "fig3a-running-mean",
            Self::Fig3bAllan => "fig3b-allan",
            Self::Calibrate => "calibrate",
            Self::Selftest => "selftest",
        }
    }

    /// Stable stream index for seed derivation.
    fn stream_id(&self) -> u64 {
        match self {
            Self::Fig2GradientScan => 1,
            Self::Fig3aRunningMean => 2,
            Self::Fig3bAllan => 3,
            Self::Calibrate => 4,
            Self::Selftest => 5,
        }
    }
}

/// One output file, assembled in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: &'static str,
    pub files: Vec<OutputFile>,
    pub summary: Vec<String>,
    /// Simulated experiment time, s.
    pub sim_time: f64,
    /// Total simulated ion interrogations.
    pub interrogations: u64,
    /// Failed self-test checks (zero for all other scenarios).
    pub failures: usize,
}

/// Run a named scenario against a validated configuration.
pub fn run_scenario(name: &str, config: &ScenarioConfig) -> Result<ScenarioReport> {
    let scenario = Scenario::parse(name)?;
    run(scenario, config)
}

/// Run a parsed scenario.
pub fn run(scenario: Scenario, config: &ScenarioConfig) -> Result<ScenarioReport> {
    match scenario {
        Scenario::Fig2GradientScan => fig2_gradient_scan(config),
        Scenario::Fig3aRunningMean => fig3a_running_mean(config),
        Scenario::Fig3bAllan => fig3b_allan(config),
        Scenario::Calibrate => calibrate(config),
        Scenario::Selftest => run_selftest(config),
    }
}

/// Write a report's files under `out_dir`, removing anything already
/// written if a later write fails.
pub fn write_report(report: &ScenarioReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for file in &report.files {
        let path = out_dir.join(&file.name);
        if let Err(e) = std::fs::write(&path, &file.contents) {
            for p in &written {
                std::fs::remove_file(p).ok();
            }
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}

/// Shared per-run context.
struct Bench {
    table: ShapeFactorTable,
    fringe: FringeParams,
    seed: u64,
    hash: u64,
    detection_time: f64,
}

impl Bench {
    fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            table: config.shape_table()?,
            fringe: config.fringe_params()?,
            seed: config.echo.seed,
            hash: config.hash(),
            detection_time: config.echo.detection_ms * 1e-3,
        })
    }

    fn header(&self) -> String {
        format!("# config_hash={:016x} seed={}\n", self.hash, self.seed)
    }

    fn root(&self) -> CounterRng {
        CounterRng::new(self.seed)
    }

    /// Transport tuned to displace the ion by `distance_um`.
    fn transport_for(&self, config: &ScenarioConfig, distance_um: f64) -> Result<TransportSummary> {
        let v2 = tune_v2_peak(&self.table, config.trap.v1, distance_um * 1e-6)?;
        let scenario = TransportScenario {
            v2_peak: v2,
            ..config.transport_scenario()
        };
        transport_summary(&scenario, &self.table, CA40_MASS, ELEMENTARY_CHARGE)
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Warning line when any transport violates the adiabaticity threshold.
fn adiabaticity_warning<'a>(
    transports: impl IntoIterator<Item = &'a TransportSummary>,
) -> Option<String> {
    let worst = transports
        .into_iter()
        .map(|t| t.adiabaticity)
        .fold(f64::INFINITY, f64::min);
    (worst < crate::trap::ADIABATIC_WARN_RATIO).then(|| {
        format!(
            "warning: transport adiabaticity ratio {worst:.1} below {}; the ion may not follow the minimum",
            crate::trap::ADIABATIC_WARN_RATIO
        )
    })
}

const UM_MS_PER_M_S: f64 = 1e9;
const THREE_POINT_ANGLES: [f64; 3] = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI];

/// A fringe-fit phase estimate for one (field, transport) setting.
fn fringe_phase(
    bench: &Bench,
    transport: &TransportSummary,
    field: &FieldModel,
    angles: &[f64],
    n_per_angle: u64,
    seed: u64,
    clock: &mut ExperimentClock,
) -> Result<(EchoRecord, PhaseEstimate)> {
    let record = run_echo_experiment_at(
        &transport.trajectory,
        field,
        &bench.fringe,
        angles,
        n_per_angle,
        seed,
        clock.elapsed,
    )?;
    clock.advance(n_per_angle * angles.len() as u64);
    let fit = fit_fringe(&record)?;
    Ok((record, fit.phase))
}

/// Per-distance fringe points with the resulting weighted-line gradient fit.
type ScanOutcome = (
    Vec<(f64, PhaseEstimate)>,
    crate::estimation::GradientFit,
    Vec<EchoRecord>,
);

/// Gradient measurement by a fringe-fit scan over several transport
/// distances: the slope evaluation used by fig2 and calibrate.
fn scan_gradient(
    bench: &Bench,
    transports: &[TransportSummary],
    field: &FieldModel,
    angles: &[f64],
    n_per_angle: u64,
    stream: &CounterRng,
    clock: &mut ExperimentClock,
) -> Result<ScanOutcome> {
    let mut raw = Vec::with_capacity(transports.len());
    let mut records = Vec::with_capacity(transports.len());
    for (di, transport) in transports.iter().enumerate() {
        let seed = stream.derive(di as u64).u64_at(0);
        let (record, estimate) =
            fringe_phase(bench, transport, field, angles, n_per_angle, seed, clock)?;
        raw.push((transport.displacement_integral, estimate));
        records.push(record);
    }
    // Phases come out of the fit on (-pi, pi]; unwrap along the ordered
    // distances so steep gradients keep a linear phase-versus-integral law.
    let unwrapped = unwrap_phases(&raw.iter().map(|(_, e)| e.phi).collect::<Vec<_>>());
    let points: Vec<(f64, PhaseEstimate)> = raw
        .iter()
        .zip(unwrapped.iter())
        .map(|((integral, est), &phi)| (*integral, PhaseEstimate { phi, ..*est }))
        .collect();
    let fit = gradient_fit(&points)?;
    Ok((points, fit, records))
}

fn fig2_gradient_scan(config: &ScenarioConfig) -> Result<ScenarioReport> {
    let bench = Bench::new(config)?;
    let coils = config.coil_model()?;
    let angles = config.analysis_angles();
    let scen = bench.root().derive(Scenario::Fig2GradientScan.stream_id());
    let mut clock = ExperimentClock::new(bench.detection_time);

    // Distances are swept once; every current case reuses the transports.
    let mut distances = config.fig2.distances_um.clone();
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let transports: Vec<TransportSummary> = distances
        .iter()
        .map(|&d| bench.transport_for(config, d))
        .collect::<Result<_>>()?;

    let mut gradient_rows = String::new();
    let mut slope_rows = String::new();
    let mut summary = Vec::new();
    let mut inset: Option<OutputFile> = None;

    if let Some(w) = adiabaticity_warning(transports.iter()) {
        summary.push(w);
    }

    for (ci, case) in config.fig2.cases.iter().enumerate() {
        let field = coils.field_model(case[0], case[1])?;
        let case_stream = scen.derive(ci as u64);
        let (points, fit, records) = scan_gradient(
            &bench,
            &transports,
            &field,
            &angles,
            config.echo.n_per_angle,
            &case_stream,
            &mut clock,
        )?;
        for (integral, est) in &points {
            let _ = writeln!(
                gradient_rows,
                "{},{},{},{}",
                fmt(integral * UM_MS_PER_M_S),
                fmt(est.phi),
                fmt(est.sigma),
                ci
            );
        }
        let _ = writeln!(
            slope_rows,
            "{},{},{},{},{},{},{}",
            ci,
            fmt(case[0]),
            fmt(case[1]),
            fmt(fit.gradient),
            fmt(fit.gradient_stderr),
            fmt(fit.intercept),
            fmt(field.gradient),
        );
        summary.push(format!(
            "case {} (I1 = {} A, I2 = {} A): gradient {:+.4e} +/- {:.2e} T/m (true {:+.4e})",
            ci, case[0], case[1], fit.gradient, fit.gradient_stderr, field.gradient
        ));
        if ci == 0 {
            // Fringe of the largest transport: the inset-style record.
            let record = records.last().unwrap();
            let mut rows = String::new();
            for p in &record.points {
                let _ = writeln!(
                    rows,
                    "{},{},{},{}",
                    fmt(p.angle),
                    p.interrogations,
                    p.spin_up,
                    fmt(p.up_fraction())
                );
            }
            inset = Some(OutputFile {
                name: "fringe.csv".into(),
                contents: format!("{}angle_rad,n,k,up_fraction\n{rows}", bench.header()),
            });
        }
    }

    let mut files = vec![
        OutputFile {
            name: "gradient.csv".into(),
            contents: format!(
                "{}integral_um_ms,phase_rad,sigma_rad,case\n{gradient_rows}",
                bench.header()
            ),
        },
        OutputFile {
            name: "slopes.csv".into(),
            contents: format!(
                "{}case,i1_A,i2_A,gradient_T_per_m,stderr_T_per_m,intercept_rad,true_gradient_T_per_m\n{slope_rows}",
                bench.header()
            ),
        },
    ];
    if let Some(f) = inset {
        files.push(f);
    }
    summary.push(sim_time_line(&clock));
    Ok(ScenarioReport {
        scenario: Scenario::Fig2GradientScan.name(),
        files,
        summary,
        sim_time: clock.elapsed,
        interrogations: clock.interrogations,
        failures: 0,
    })
}

/// A sequence of three-point phase estimates under a common field model,
/// with the simulated clock driving the drift model.
fn three_point_sequence(
    bench: &Bench,
    transport: &TransportSummary,
    field: &FieldModel,
    count: usize,
    n_per_angle: u64,
    stream: &CounterRng,
    clock: &mut ExperimentClock,
) -> Result<Vec<PhaseEstimate>> {
    let mut estimates = Vec::with_capacity(count);
    for k in 0..count {
        let seed = stream.u64_at(k as u64);
        let record = run_echo_experiment_at(
            &transport.trajectory,
            field,
            &bench.fringe,
            &THREE_POINT_ANGLES,
            n_per_angle,
            seed,
            clock.elapsed,
        )?;
        clock.advance(n_per_angle * 3);
        estimates.push(three_point_estimate(&record)?);
    }
    Ok(estimates)
}

fn fig3a_running_mean(config: &ScenarioConfig) -> Result<ScenarioReport> {
    let bench = Bench::new(config)?;
    let scen = bench.root().derive(Scenario::Fig3aRunningMean.stream_id());
    let transport = bench.transport_for(config, config.fig3a.displacement_um)?;
    let field = config.field_model()?;
    let zero_field = FieldModel::with_drift(field.b0, 0.0, field.drift_rate)?;
    let n = config.echo.n_per_angle;
    let points = config.fig3a.points;

    // Each series runs on its own simulated clock, as two back-to-back
    // acquisitions of equal length would.
    let mut clock_a = ExperimentClock::new(bench.detection_time);
    let mut clock_b = ExperimentClock::new(bench.detection_time);
    let with_gradient = three_point_sequence(
        &bench,
        &transport,
        &field,
        points,
        n,
        &scen.derive(0),
        &mut clock_a,
    )?;
    let zero_gradient = three_point_sequence(
        &bench,
        &transport,
        &zero_field,
        points,
        n,
        &scen.derive(1),
        &mut clock_b,
    )?;

    let phases_a: Vec<f64> = with_gradient.iter().map(|e| e.phi).collect();
    let phases_b: Vec<f64> = zero_gradient.iter().map(|e| e.phi).collect();
    let means_a = running_mean_series(&phases_a);
    let means_b = running_mean_series(&phases_b);

    let mut rows = String::new();
    for k in 0..points {
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{},{}",
            k + 1,
            fmt(phases_a[k]),
            fmt(means_a[k].mean),
            fmt(means_a[k].stderr),
            fmt(phases_b[k]),
            fmt(means_b[k].mean),
            fmt(means_b[k].stderr),
        );
    }

    let last_a = means_a.last().unwrap();
    let last_b = means_b.last().unwrap();
    let separation = (last_a.mean - last_b.mean).abs()
        / last_a.stderr.hypot(last_b.stderr).max(f64::MIN_POSITIVE);
    let delta_b_rel = phase_to_relative_field(
        last_a.mean - last_b.mean,
        transport.displacement_integral,
        transport.trajectory.max_displacement(),
        field.b0,
    )?;
    let mut summary = vec![
        format!(
            "with gradient: final mean phase {:+.5} +/- {:.5} rad over {} estimates",
            last_a.mean, last_a.stderr, points
        ),
        format!(
            "zero gradient: final mean phase {:+.5} +/- {:.5} rad over {} estimates",
            last_b.mean, last_b.stderr, points
        ),
        format!(
            "series separation: {separation:.1} combined standard errors; implied dB/B0 = {delta_b_rel:.3e}"
        ),
        format!(
            "per estimate: 3 x {} interrogations, {} ms each",
            n,
            fmt(3.0 * n as f64 * bench.detection_time * 1e3)
        ),
        sim_time_line_pair(&clock_a, &clock_b),
    ];
    if let Some(w) = adiabaticity_warning([&transport]) {
        summary.insert(0, w);
    }

    Ok(ScenarioReport {
        scenario: Scenario::Fig3aRunningMean.name(),
        files: vec![OutputFile {
            name: "running_mean.csv".into(),
            contents: format!(
                "{}k,phase_grad_rad,mean_grad_rad,stderr_grad_rad,phase_zero_rad,mean_zero_rad,stderr_zero_rad\n{rows}",
                bench.header()
            ),
        }],
        summary,
        sim_time: clock_a.elapsed + clock_b.elapsed,
        interrogations: clock_a.interrogations + clock_b.interrogations,
        failures: 0,
    })
}

/// Averaging sizes 1, 2, 5 per decade up to `max`.
fn decade_sizes(max: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for mult in [1, 2, 5] {
            let n = decade.saturating_mul(mult);
            if n > max {
                break 'outer;
            }
            sizes.push(n);
        }
        decade = decade.saturating_mul(10);
    }
    sizes
}

fn fig3b_allan(config: &ScenarioConfig) -> Result<ScenarioReport> {
    let bench = Bench::new(config)?;
    let scen = bench.root().derive(Scenario::Fig3bAllan.stream_id());
    let transport = bench.transport_for(config, config.fig3b.displacement_um)?;
    let field = config.field_model()?;
    let n = config.echo.n_per_angle;
    let count = config.fig3b.estimates;

    let mut clock = ExperimentClock::new(bench.detection_time);
    let estimates = three_point_sequence(&bench, &transport, &field, count, n, &scen, &mut clock)?;
    let phases: Vec<f64> = estimates.iter().map(|e| e.phi).collect();

    let sizes = decade_sizes(count / 2);
    let series = allan_deviation(&phases, &sizes)?;

    // Theory columns: Eq.-(6)-style projection-noise limits for the
    // configured contrast and for a perfect-contrast fringe, both evaluated
    // at phi = 0 and scaled with the accumulated interrogation count.
    let realistic = shot_noise_sigma(&bench.fringe, 0.0, 1)?;
    let perfect = shot_noise_sigma(&FringeParams::new(0.5, 0.5)?, 0.0, 1)?;
    let probe = transport.trajectory.max_displacement();
    let integral = transport.displacement_integral;
    let to_rel =
        |sigma: f64| -> Result<f64> { phase_to_relative_field(sigma, integral, probe, field.b0) };

    let mut rows = String::new();
    for p in &series.points {
        let interr = (p.n as u64) * n;
        let theory = realistic / (interr as f64).sqrt();
        let ideal = perfect / (interr as f64).sqrt();
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{},{},{}",
            p.n,
            fmt(p.deviation),
            fmt(to_rel(p.deviation)?),
            interr,
            fmt(theory),
            fmt(to_rel(theory)?),
            fmt(ideal),
            fmt(to_rel(ideal)?),
        );
    }

    let mut summary = Vec::new();
    if let Some(w) = adiabaticity_warning([&transport]) {
        summary.push(w);
    }
    if !series.omitted.is_empty() {
        summary.push(format!(
            "omitted averaging sizes with fewer than two blocks: {:?}",
            series.omitted
        ));
    }
    // Sensitivity at ~1e4 accumulated interrogations, if the run got there.
    if let Some(p) = series.points.iter().find(|p| (p.n as u64) * n >= 10_000) {
        summary.push(format!(
            "relative field sensitivity at {} interrogations: {:.3e} (theory {:.3e})",
            (p.n as u64) * n,
            to_rel(p.deviation)?,
            to_rel(realistic / (((p.n as u64) * n) as f64).sqrt())?,
        ));
    }
    summary.push(format!(
        "drift model: {} nT/s across the {} um probe",
        fmt(field.drift_rate * 1e9),
        fmt(probe * 1e6)
    ));
    summary.push(sim_time_line(&clock));

    Ok(ScenarioReport {
        scenario: Scenario::Fig3bAllan.name(),
        files: vec![OutputFile {
            name: "allan.csv".into(),
            contents: format!(
                "{}n,sigma_rad,sigma_rel_field,interrogations,theory_sigma_rad,theory_sigma_rel_field,ideal_sigma_rad,ideal_sigma_rel_field\n{rows}",
                bench.header()
            ),
        }],
        summary,
        sim_time: clock.elapsed,
        interrogations: clock.interrogations,
        failures: 0,
    })
}

fn calibrate(config: &ScenarioConfig) -> Result<ScenarioReport> {
    let bench = Bench::new(config)?;
    if config.fig2.cases.len() < 2 {
        return Err(Error::Config(
            "calibrate needs at least two initial coil-current cases in fig2.cases".into(),
        ));
    }
    let truth = config.coil_model()?;
    let angles = config.analysis_angles();
    let n_cal = config.calibration.n_per_angle;
    let scen = bench.root().derive(Scenario::Calibrate.stream_id());
    let mut clock = ExperimentClock::new(bench.detection_time);

    let mut distances = config.calibration.distances_um.clone();
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let transports: Vec<TransportSummary> = distances
        .iter()
        .map(|&d| bench.transport_for(config, d))
        .collect::<Result<_>>()?;

    // Each gradient measurement is a full fringe-fit scan over the
    // calibration distances against the true coil physics.
    let mut measurement_index = 0u64;
    let mut measure = |i1: f64, i2: f64, clock: &mut ExperimentClock| -> Result<(f64, f64, f64)> {
        let field = truth.field_model(i1, i2)?;
        let stream = scen.derive(measurement_index);
        measurement_index += 1;
        let (_, fit, _) =
            scan_gradient(&bench, &transports, &field, &angles, n_cal, &stream, clock)?;
        Ok((fit.gradient, fit.gradient_stderr, field.b0))
    };

    let mut rows = String::new();
    let mut initial = Vec::new();
    for case in config.fig2.cases.iter().take(2) {
        let (g, sigma, b0) = measure(case[0], case[1], &mut clock)?;
        let m = CalibrationMeasurement::new(case[0], case[1], g, sigma, b0)?;
        let _ = writeln!(
            rows,
            "0,{},{},{},{}",
            fmt(m.i1),
            fmt(m.i2),
            fmt(m.gradient),
            fmt(m.gradient_sigma)
        );
        initial.push(m);
    }

    let target_b0 = config.field.b0_mt * 1e-3;
    let mut experiment =
        |i1: f64, i2: f64| -> Result<(f64, f64, f64)> { measure(i1, i2, &mut clock) };
    let outcome = closed_loop_calibrate(
        &mut experiment,
        &initial,
        target_b0,
        config.calibration.tolerance_t_per_m,
        config.calibration.max_iter,
        !config.calibration.fit_ambient,
    )?;
    for step in &outcome.history {
        let _ = writeln!(
            rows,
            "{},{},{},{},{}",
            step.iteration,
            fmt(step.i1),
            fmt(step.i2),
            fmt(step.gradient),
            fmt(step.sigma)
        );
    }

    let residual_true = truth.gradient_at(outcome.i1, outcome.i2);
    let final_step = outcome.history.last().unwrap();
    let max_distance = distances.last().unwrap() * 1e-6;
    let coherence_pair = coherence_estimate(residual_true.abs(), 4e-6, CoherenceMode::DfsPair)?;
    let coherence_single =
        coherence_estimate(residual_true.abs(), max_distance, CoherenceMode::SingleIon)?;
    let mut summary = vec![
        format!(
            "converged in {} iterations: I1 = {:.6} A, I2 = {:.6} A",
            outcome.iterations, outcome.i1, outcome.i2
        ),
        format!(
            "measured gradient {:+.3e} +/- {:.3e} T/m; true residual gradient {:+.3e} T/m",
            final_step.gradient, final_step.sigma, residual_true
        ),
        format!(
            "coherence estimate: {} s for a 4 um pair, {} s for single-ion transport over {} um",
            fmt_coherence(coherence_pair),
            fmt_coherence(coherence_single),
            fmt(max_distance * 1e6)
        ),
        sim_time_line(&clock),
    ];
    if let Some(w) = adiabaticity_warning(transports.iter()) {
        summary.insert(0, w);
    }

    Ok(ScenarioReport {
        scenario: Scenario::Calibrate.name(),
        files: vec![OutputFile {
            name: "calibration.csv".into(),
            contents: format!(
                "{}iteration,i1_A,i2_A,gradient_T_per_m,sigma\n{rows}",
                bench.header()
            ),
        }],
        summary,
        sim_time: clock.elapsed,
        interrogations: clock.interrogations,
        failures: 0,
    })
}

fn fmt_coherence(t: f64) -> String {
    if t.is_infinite() {
        "unbounded".to_string()
    } else {
        format!("{t:.3}")
    }
}

fn run_selftest(config: &ScenarioConfig) -> Result<ScenarioReport> {
    config.validate()?;
    let results = selftest::run_all();
    let failures = results.iter().filter(|r| !r.passed).count();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut summary: Vec<String> = results
        .iter()
        .map(|r| {
            format!(
                "{:width$}  {}  {}",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.detail,
                width = width
            )
        })
        .collect();
    summary.push(format!(
        "{} checks, {} passed, {} failed",
        results.len(),
        results.len() - failures,
        failures
    ));
    Ok(ScenarioReport {
        scenario: Scenario::Selftest.name(),
        files: Vec::new(),
        summary,
        sim_time: 0.0,
        interrogations: 0,
        failures,
    })
}

fn sim_time_line(clock: &ExperimentClock) -> String {
    format!(
        "simulated experiment time: {:.1} s ({} interrogations at {} ms detection)",
        clock.elapsed,
        clock.interrogations,
        fmt(clock.detection_time * 1e3)
    )
}

fn sim_time_line_pair(a: &ExperimentClock, b: &ExperimentClock) -> String {
    format!(
        "simulated experiment time: {:.1} s ({} interrogations at {} ms detection)",
        a.elapsed + b.elapsed,
        a.interrogations + b.interrogations,
        fmt(a.detection_time * 1e3)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn small_config() -> ScenarioConfig {
        ScenarioConfig::load(
            None,
            &[
                "echo.n_per_angle=50".to_string(),
                "echo.angles=20".to_string(),
                "fig2.distances_um=[17.5, 35.0]".to_string(),
                "fig3a.points=10".to_string(),
                "fig3b.estimates=40".to_string(),
                "calibration.n_per_angle=500".to_string(),
                "calibration.distances_um=[17.5, 35.0, 52.5, 70.0]".to_string(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let err = run_scenario("fig9", &ScenarioConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownScenario(_)));
    }

    #[test]
    fn scenario_names_roundtrip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::parse(s.name()).unwrap(), s);
        }
    }

    #[test]
    fn every_file_carries_hash_and_seed_header() {
        let config = small_config();
        for name in [
            "fig2-gradient-scan",
            "fig3a-running-mean",
            "fig3b-allan",
            "calibrate",
        ] {
            let report = run_scenario(name, &config).unwrap();
            assert!(!report.files.is_empty(), "{name} produced no files");
            for f in &report.files {
                let first = f.contents.lines().next().unwrap();
                assert!(
                    first.starts_with("# config_hash=") && first.contains("seed=42"),
                    "{name}/{}: bad header line '{first}'",
                    f.name
                );
                let second = f.contents.lines().nth(1).unwrap();
                assert!(second.split(',').count() >= 3, "{name}/{}", f.name);
            }
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let config = small_config();
        for name in [
            "fig2-gradient-scan",
            "fig3a-running-mean",
            "fig3b-allan",
            "calibrate",
        ] {
            let a = run_scenario(name, &config).unwrap();
            let b = run_scenario(name, &config).unwrap();
            assert_eq!(a.files, b.files, "{name} not reproducible");
        }
    }

    #[test]
    fn different_seed_changes_outputs() {
        let config = small_config();
        let other = {
            let mut overrides: Vec<String> = vec!["echo.seed=43".into()];
            overrides.extend([
                "echo.n_per_angle=50".to_string(),
                "echo.angles=20".to_string(),
                "fig2.distances_um=[17.5, 35.0]".to_string(),
                "fig3a.points=10".to_string(),
                "fig3b.estimates=40".to_string(),
                "calibration.n_per_angle=500".to_string(),
                "calibration.distances_um=[17.5, 35.0, 52.5, 70.0]".to_string(),
            ]);
            ScenarioConfig::load(None, &overrides).unwrap()
        };
        let a = run_scenario("fig3a-running-mean", &config).unwrap();
        let b = run_scenario("fig3a-running-mean", &other).unwrap();
        assert_ne!(a.files, b.files);
    }

    #[test]
    fn selftest_reports_all_green() {
        let report = run_scenario("selftest", &ScenarioConfig::default()).unwrap();
        assert_eq!(
            report.failures,
            0,
            "selftest failures:\n{}",
            report.summary.join("\n")
        );
    }

    #[test]
    fn write_report_places_files() {
        let config = small_config();
        let report = run_scenario("fig3a-running-mean", &config).unwrap();
        let dir = std::env::temp_dir().join(format!("magprobe-out-{}", std::process::id()));
        let written = write_report(&report, &dir).unwrap();
        assert_eq!(written.len(), 1);
        let text = std::fs::read_to_string(&written[0]).unwrap();
        assert_eq!(text, report.files[0].contents);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn decade_sizes_cover_the_range() {
        assert_eq!(decade_sizes(50), vec![1, 2, 5, 10, 20, 50]);
        assert_eq!(decade_sizes(3), vec![1, 2]);
    }

    #[test]
    fn non_adiabatic_transport_is_flagged_in_the_summary() {
        let mut overrides = vec!["trap.duration_us=20.0".to_string()];
        overrides.extend([
            "echo.n_per_angle=20".to_string(),
            "fig3a.points=4".to_string(),
        ]);
        let config = ScenarioConfig::load(None, &overrides).unwrap();
        let report = run_scenario("fig3a-running-mean", &config).unwrap();
        assert!(
            report.summary[0].contains("adiabaticity"),
            "{:?}",
            report.summary
        );
    }

    #[test]
    fn fig2_slopes_are_ordered_across_the_coil_cases() {
        // Default coil cases: strong, same-current, optimized. The fitted
        // gradients must fall in that order, the optimized case sitting
        // more than two orders of magnitude below the strong one.
        let config = ScenarioConfig::default();
        let report = run_scenario("fig2-gradient-scan", &config).unwrap();
        let slopes = report
            .files
            .iter()
            .find(|f| f.name == "slopes.csv")
            .unwrap();
        let fitted: Vec<f64> = slopes
            .contents
            .lines()
            .skip(2)
            .map(|line| line.split(',').nth(3).unwrap().parse::<f64>().unwrap())
            .collect();
        assert_eq!(fitted.len(), 3);
        assert!(
            fitted[0].abs() > fitted[1].abs() && fitted[1].abs() > fitted[2].abs(),
            "{fitted:?}"
        );
        assert!(fitted[0].abs() / fitted[2].abs() > 100.0, "{fitted:?}");
        assert!(fitted[1].abs() / fitted[2].abs() > 10.0, "{fitted:?}");
    }

    #[test]
    fn fig3b_theory_column_is_anchored_to_the_projection_noise_constant() {
        // The Eq.-(6)-style column starts at 1.8292/sqrt(N): scaling the
        // first row back to a single interrogation recovers the constant,
        // within 10% of the nominal 1.83.
        let config = small_config();
        let report = run_scenario("fig3b-allan", &config).unwrap();
        let allan = &report.files[0];
        let first = allan.contents.lines().nth(2).unwrap();
        let cols: Vec<&str> = first.split(',').collect();
        let n: f64 = cols[0].parse().unwrap();
        let interrogations: f64 = cols[3].parse().unwrap();
        let theory: f64 = cols[4].parse().unwrap();
        assert_eq!(n, 1.0);
        let constant = theory * interrogations.sqrt();
        assert!((constant - 1.83).abs() < 0.183, "{constant}");
        // Ideal-contrast column anchors at exactly 1/sqrt(N).
        let ideal: f64 = cols[6].parse().unwrap();
        assert!((ideal * interrogations.sqrt() - 1.0).abs() < 1e-9);
    }
}
