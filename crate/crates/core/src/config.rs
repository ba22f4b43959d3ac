//! Scenario configuration.
//!
//! One TOML file with sections mirroring the module namespaces configures
//! every scenario. Values omitted from the file fall back to built-in
//! defaults (the defaults alone reproduce the reference setup: 1.35 MHz
//! axial frequency, 140 um transport, 0.7 mT offset field), and individual
//! keys can be overridden from the command line with `key.path=value`
//! strings. Config parsing is fail-fast: every referenced file must exist
//! and every parameter must pass its module invariants before a run starts.
//!
//! All config units are laboratory-friendly (um, us, mT, nT, ms, V, A);
//! conversion to SI happens here and nowhere else.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::CoilModel;
use crate::error::{Error, Result};
use crate::shape::{ShapeFactorTable, SyntheticShape};
use crate::spin::{FieldModel, FringeParams};
use crate::trap::{TransportScenario, WaveformKind};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub trap: TrapConfig,
    pub field: FieldConfig,
    pub fringe: FringeConfig,
    pub echo: EchoConfig,
    pub coils: CoilsConfig,
    pub calibration: CalibrationConfig,
    pub output: OutputConfig,
    pub fig2: Fig2Config,
    pub fig3a: Fig3aConfig,
    pub fig3b: Fig3bConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    /// Static voltage on the main segment, V.
    pub v1: f64,
    /// Peak voltage on the neighbor segment, V.
    pub v2_peak: f64,
    /// Transport pulse duration, us.
    pub duration_us: f64,
    /// Trajectory time steps.
    pub samples: usize,
    /// Optional tabulated shape-factor file; the synthetic model is used
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape_file: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    /// Electrode pitch (center-to-center), um. An empty `centers_um` list
    /// places two segments at [0, pitch].
    pub pitch_um: f64,
    /// Gaussian profile width, um. Comparable to the pitch by construction;
    /// the default is tuned so the resting axial frequency is 1.35 MHz.
    pub width_um: f64,
    /// Electrode centers, um; empty means derive from the pitch.
    pub centers_um: Vec<f64>,
    /// Samples per tabulated segment.
    pub samples: usize,
}

impl SyntheticConfig {
    /// Electrode centers with the pitch fallback applied, um.
    pub fn effective_centers_um(&self) -> Vec<f64> {
        if self.centers_um.is_empty() {
            vec![0.0, self.pitch_um]
        } else {
            self.centers_um.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Offset field, mT.
    #[serde(rename = "b0_mT")]
    pub b0_mt: f64,
    /// Axial gradient, mT/m.
    #[serde(rename = "gradient_mT_per_m")]
    pub gradient_mt_per_m: f64,
    /// Drift rate of the probed field difference, nT/s.
    #[serde(rename = "drift_nT_per_s")]
    pub drift_nt_per_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FringeConfig {
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoConfig {
    /// Number of analysis angles, uniformly spaced over [0, 2pi).
    pub angles: usize,
    /// Interrogations per analysis angle.
    pub n_per_angle: u64,
    /// Master seed; every random stream in a run derives from it.
    pub seed: u64,
    /// Detection time per interrogation, ms (simulated bookkeeping only).
    pub detection_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoilsConfig {
    /// Gradient per ampere, coil 1, T/m/A.
    pub a1: f64,
    /// Gradient per ampere, coil 2, T/m/A.
    pub a2: f64,
    /// Field per ampere, coil 1, T/A.
    pub b1: f64,
    /// Field per ampere, coil 2, T/A.
    pub b2: f64,
    pub ambient: AmbientConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmbientConfig {
    /// Ambient gradient, T/m.
    pub a0: f64,
    /// Ambient field, T.
    pub b0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Convergence tolerance on |gradient|, T/m.
    #[serde(rename = "tolerance_T_per_m")]
    pub tolerance_t_per_m: f64,
    /// Closed-loop iteration cap.
    pub max_iter: usize,
    /// Interrogations per angle for calibration measurements.
    pub n_per_angle: u64,
    /// Transport distances for each gradient measurement, um.
    pub distances_um: Vec<f64>,
    /// Fit ambient offsets instead of assuming they are zero.
    pub fit_ambient: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Config {
    /// Transport distances to sweep, um.
    pub distances_um: Vec<f64>,
    /// Coil current cases (i1, i2), A.
    pub cases: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3aConfig {
    /// Phase estimates per series.
    pub points: usize,
    /// Probe transport distance, um.
    pub displacement_um: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3bConfig {
    /// Length of the phase-estimate sequence.
    pub estimates: usize,
    /// Probe transport distance, um.
    pub displacement_um: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            v1: -6.0,
            v2_peak: -3.2766,
            duration_us: 400.0,
            samples: 400,
            shape_file: None,
            synthetic: SyntheticConfig::default(),
        }
    }
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            pitch_um: 450.0,
            width_um: 448.7,
            centers_um: Vec::new(),
            samples: 2001,
        }
    }
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            b0_mt: 0.7,
            // 7 nT over 19 um.
            gradient_mt_per_m: 7e-6 / 19e-6,
            drift_nt_per_s: 0.0,
        }
    }
}

impl Default for FringeConfig {
    fn default() -> Self {
        Self { a1: 0.31, a2: 0.44 }
    }
}

impl Default for EchoConfig {
    fn default() -> Self {
        Self {
            angles: 100,
            n_per_angle: 200,
            seed: 42,
            detection_ms: 5.0,
        }
    }
}

impl Default for CoilsConfig {
    fn default() -> Self {
        // Constructed so the zero-gradient root sits at (1.660, 2.122) A
        // with a 0.7 mT offset field there.
        let a2 = 1.0e-3;
        let a1 = -a2 * 2.122 / 1.660;
        let b = 0.7e-3 / (1.660 + 2.122);
        Self {
            a1,
            a2,
            b1: b,
            b2: b,
            ambient: AmbientConfig::default(),
        }
    }
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            tolerance_t_per_m: 1e-6,
            max_iter: 10,
            n_per_angle: 10_000,
            // Same spacing as the fig2 sweep: 17.5 um steps keep the phase
            // increment between adjacent distances below pi even for the
            // strong-gradient initial coil settings, so unwrapping is safe.
            distances_um: vec![17.5, 35.0, 52.5, 70.0, 87.5, 105.0, 122.5, 140.0],
            fit_ambient: false,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            distances_um: vec![17.5, 35.0, 52.5, 70.0, 87.5, 105.0, 122.5, 140.0],
            cases: vec![[3.0, 1.0], [1.9, 1.9], [1.660, 2.122]],
        }
    }
}

impl Default for Fig3aConfig {
    fn default() -> Self {
        Self {
            points: 100,
            displacement_um: 19.0,
        }
    }
}

impl Default for Fig3bConfig {
    fn default() -> Self {
        Self {
            estimates: 2000,
            displacement_um: 19.0,
        }
    }
}

/// Recursively merge `overlay` into `base` (tables merge, scalars replace).
fn merge_value(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_value(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parse an override value as a TOML literal, falling back to a string.
fn parse_override_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    if let Ok(table) = doc.parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(text.to_string())
}

impl ScenarioConfig {
    /// Build a config from an optional TOML file plus `key.path=value`
    /// overrides, then validate everything fail-fast.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut merged = toml::Value::try_from(ScenarioConfig::default())
            .map_err(|e| Error::Config(format!("internal default serialization: {e}")))?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            let file_value: toml::Value = text
                .parse()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            merge_value(&mut merged, file_value);
        }
        for entry in overrides {
            let Some((key, value)) = entry.split_once('=') else {
                return Err(Error::Config(format!(
                    "override '{entry}' is not of the form key.path=value"
                )));
            };
            let mut node = &mut merged;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                if part.is_empty() {
                    return Err(Error::Config(format!(
                        "override '{entry}' has an empty key part"
                    )));
                }
                let table = node.as_table_mut().ok_or_else(|| {
                    Error::Config(format!("override '{entry}': '{part}' is not a table"))
                })?;
                if i + 1 == parts.len() {
                    table.insert(part.to_string(), parse_override_value(value.trim()));
                    break;
                }
                node = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            }
        }
        let config: ScenarioConfig = merged
            .try_into()
            .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// FNV-1a hash of the canonical serialized form; recorded in every
    /// output file so results can be traced to their exact configuration.
    /// The output directory is excluded: it does not influence any computed
    /// number, and runs that differ only in where they write must hash alike.
    pub fn hash(&self) -> u64 {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        let text = toml::to_string(&canonical).unwrap_or_default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Canonical TOML serialization of the merged configuration.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn shape_table(&self) -> Result<ShapeFactorTable> {
        match &self.trap.shape_file {
            Some(path) => ShapeFactorTable::load(path),
            None => ShapeFactorTable::synthetic(&self.synthetic_shape()),
        }
    }

    fn synthetic_shape(&self) -> SyntheticShape {
        let s = &self.trap.synthetic;
        SyntheticShape {
            centers: s.effective_centers_um().iter().map(|c| c * 1e-6).collect(),
            width: s.width_um * 1e-6,
            samples: s.samples,
            margin_widths: 2.5,
        }
    }

    pub fn transport_scenario(&self) -> TransportScenario {
        TransportScenario {
            v1: self.trap.v1,
            v2_peak: self.trap.v2_peak,
            duration: self.trap.duration_us * 1e-6,
            waveform: WaveformKind::SineReturn,
            samples: self.trap.samples,
        }
    }

    pub fn field_model(&self) -> Result<FieldModel> {
        FieldModel::with_drift(
            self.field.b0_mt * 1e-3,
            self.field.gradient_mt_per_m * 1e-3,
            self.field.drift_nt_per_s * 1e-9,
        )
    }

    pub fn fringe_params(&self) -> Result<FringeParams> {
        FringeParams::new(self.fringe.a1, self.fringe.a2)
    }

    pub fn coil_model(&self) -> Result<CoilModel> {
        CoilModel::new(
            self.coils.ambient.a0,
            (self.coils.a1, self.coils.a2),
            self.coils.ambient.b0,
            (self.coils.b1, self.coils.b2),
        )
    }

    /// Uniform analysis angles over [0, 2pi).
    pub fn analysis_angles(&self) -> Vec<f64> {
        let n = self.echo.angles;
        (0..n)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
            .collect()
    }

    /// Check every module invariant up front.
    pub fn validate(&self) -> Result<()> {
        let table = self.shape_table()?;
        if table.segment_count() < 2 {
            return Err(Error::Config(
                "shape table needs at least two segments for transport".into(),
            ));
        }
        self.transport_scenario().validate()?;
        let field = self.field_model()?;
        let (lo, hi) = table.domain();
        if !field.positive_over(lo, hi) {
            return Err(Error::Config(
                "field model turns non-positive inside the trap domain".into(),
            ));
        }
        self.fringe_params()?;
        self.coil_model()?;
        if self.echo.angles < 4 {
            return Err(Error::Config(
                "echo.angles must be at least 4 for the fringe fit".into(),
            ));
        }
        if self.echo.n_per_angle == 0 {
            return Err(Error::Config("echo.n_per_angle must be at least 1".into()));
        }
        if self.echo.detection_ms < 0.0 {
            return Err(Error::Config(
                "echo.detection_ms must be non-negative".into(),
            ));
        }
        if self.calibration.tolerance_t_per_m <= 0.0 || self.calibration.tolerance_t_per_m.is_nan()
        {
            return Err(Error::Config(
                "calibration.tolerance_T_per_m must be positive".into(),
            ));
        }
        if self.calibration.max_iter == 0 {
            return Err(Error::Config(
                "calibration.max_iter must be at least 1".into(),
            ));
        }
        if self.calibration.n_per_angle == 0 {
            return Err(Error::Config(
                "calibration.n_per_angle must be at least 1".into(),
            ));
        }
        if self.calibration.distances_um.len() < 2 {
            return Err(Error::Config(
                "calibration.distances_um needs at least 2 distances".into(),
            ));
        }
        if self.fig2.distances_um.len() < 2 {
            return Err(Error::Config(
                "fig2.distances_um needs at least 2 distances".into(),
            ));
        }
        if self.fig2.cases.is_empty() {
            return Err(Error::Config("fig2.cases must not be empty".into()));
        }
        for case in &self.fig2.cases {
            if case[0] < 0.0 || case[1] < 0.0 {
                return Err(Error::Config(format!(
                    "fig2 case ({}, {}) A has a negative current",
                    case[0], case[1]
                )));
            }
        }
        for d in self
            .fig2
            .distances_um
            .iter()
            .chain(self.calibration.distances_um.iter())
            .chain([self.fig3a.displacement_um, self.fig3b.displacement_um].iter())
        {
            if *d <= 0.0 || d.is_nan() {
                return Err(Error::Config(format!(
                    "transport distance {d} um must be positive"
                )));
            }
        }
        if self.fig3a.points < 2 {
            return Err(Error::Config("fig3a.points must be at least 2".into()));
        }
        if self.fig3b.estimates < 4 {
            return Err(Error::Config("fig3b.estimates must be at least 4".into()));
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(Error::Config("output.dir must not be empty".into()));
        }
        Ok(())
    }
}
