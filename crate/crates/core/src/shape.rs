//! Normalized electrode shape factors ũᵢ(x).
//!
//! Each trap segment contributes a dimensionless spatial profile: the axial
//! potential produced per volt applied to that segment. Profiles are stored
//! as sampled tables on a common axial domain and interpolated with cubic
//! splines. Tables come either from a plain-text file (one block per
//! segment) or from a built-in synthetic model, a Gaussian bump per segment
//! whose width is of order the electrode pitch.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spline::CubicSpline;

/// Sampled shape factor of one segment, positions in meters.
#[derive(Debug, Clone)]
pub struct SegmentShape {
    positions: Vec<f64>,
    values: Vec<f64>,
    spline: CubicSpline,
    center: f64,
}

impl SegmentShape {
    fn new(positions: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(
                "shape factor",
                "sample values must lie in [0, 1]",
            ));
        }
        let spline = CubicSpline::new(positions.clone(), values.clone())?;
        let (imax, _) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let center = positions[imax];
        Ok(Self {
            positions,
            values,
            spline,
            center,
        })
    }

    /// Axial position of the tabulated maximum, m. By construction this is
    /// near the electrode center.
    pub fn center(&self) -> f64 {
        self.center
    }
}

/// Shape factors for all segments of the trap model.
#[derive(Debug, Clone)]
pub struct ShapeFactorTable {
    segments: Vec<SegmentShape>,
    domain: (f64, f64),
}

/// Parameters of the synthetic per-segment Gaussian profile.
#[derive(Debug, Clone)]
pub struct SyntheticShape {
    /// Electrode centers, m.
    pub centers: Vec<f64>,
    /// Gaussian width (standard deviation), m.
    pub width: f64,
    /// Samples per table.
    pub samples: usize,
    /// Domain margin beyond the outermost centers, in units of `width`.
    pub margin_widths: f64,
}

impl Default for SyntheticShape {
    fn default() -> Self {
        Self {
            centers: vec![0.0, 450e-6],
            width: 448.7e-6,
            samples: 2001,
            margin_widths: 2.5,
        }
    }
}

impl ShapeFactorTable {
    /// Build from per-segment (positions, values) samples, positions in meters.
    pub fn new(tables: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::invalid("shape table", "no segments"));
        }
        let segments: Vec<SegmentShape> = tables
            .into_iter()
            .map(|(p, v)| SegmentShape::new(p, v))
            .collect::<Result<_>>()?;
        let domain = segments[0].spline.domain();
        for (i, seg) in segments.iter().enumerate().skip(1) {
            let d = seg.spline.domain();
            if d != domain {
                return Err(Error::invalid(
                    "shape table",
                    format!(
                        "segment {} covers [{}, {}] m but segment 0 covers [{}, {}] m; all segments must share one axial domain",
                        i, d.0, d.1, domain.0, domain.1
                    ),
                ));
            }
        }
        Ok(Self { segments, domain })
    }

    /// Build the synthetic Gaussian model.
    pub fn synthetic(params: &SyntheticShape) -> Result<Self> {
        if params.centers.len() < 2 {
            return Err(Error::invalid(
                "synthetic shape",
                "need at least two segment centers",
            ));
        }
        if params.width <= 0.0 || params.width.is_nan() {
            return Err(Error::invalid("synthetic shape", "width must be positive"));
        }
        if params.samples < 4 {
            return Err(Error::invalid("synthetic shape", "need at least 4 samples"));
        }
        let lo = params.centers.iter().cloned().fold(f64::INFINITY, f64::min)
            - params.margin_widths * params.width;
        let hi = params
            .centers
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            + params.margin_widths * params.width;
        let n = params.samples;
        let positions: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let tables = params
            .centers
            .iter()
            .map(|&c| {
                let values = positions
                    .iter()
                    .map(|&x| {
                        let u = (x - c) / params.width;
                        (-0.5 * u * u).exp()
                    })
                    .collect();
                (positions.clone(), values)
            })
            .collect();
        Self::new(tables)
    }

    /// Common axial domain, m.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn segment(&self, index: usize) -> &SegmentShape {
        &self.segments[index]
    }

    /// ũ_index(x). Errors if `x` is outside the common domain.
    pub fn value(&self, index: usize, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.segments[index].spline.eval(x))
    }

    /// dũ_index/dx, 1/m.
    pub fn deriv(&self, index: usize, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.segments[index].spline.deriv(x))
    }

    pub(crate) fn check_domain(&self, x: f64) -> Result<()> {
        if x < self.domain.0 || x > self.domain.1 {
            return Err(Error::OutOfDomain {
                what: "axial position (m)",
                value: x,
                lo: self.domain.0,
                hi: self.domain.1,
            });
        }
        Ok(())
    }

    /// Parse the plain-text table format: a `# segment <id>` header line
    /// followed by `position_um value` rows, one block per segment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tables: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut words = rest.split_whitespace();
                match (words.next(), words.next()) {
                    (Some("segment"), Some(id)) if id.parse::<u64>().is_ok() => {
                        tables.push((Vec::new(), Vec::new()));
                        continue;
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "shape file line {}: expected '# segment <id>', got '{}'",
                            lineno + 1,
                            line
                        )));
                    }
                }
            }
            let mut fields = line.split_whitespace();
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Config(format!(
                    "shape file line {}: expected 'position_um value'",
                    lineno + 1
                )));
            };
            let pos_um: f64 = a.parse().map_err(|_| {
                Error::Config(format!(
                    "shape file line {}: bad position '{a}'",
                    lineno + 1
                ))
            })?;
            let val: f64 = b.parse().map_err(|_| {
                Error::Config(format!("shape file line {}: bad value '{b}'", lineno + 1))
            })?;
            let Some(current) = tables.last_mut() else {
                return Err(Error::Config(format!(
                    "shape file line {}: data before any '# segment' header",
                    lineno + 1
                )));
            };
            current.0.push(pos_um * 1e-6);
            current.1.push(val);
        }
        if tables.is_empty() {
            return Err(Error::Config("shape file contains no segments".into()));
        }
        Self::new(tables)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read shape file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Serialize in the same format `parse` reads (positions back in um).
    pub fn to_table_string(&self) -> String {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let _ = writeln!(out, "# segment {i}");
            for (p, v) in seg.positions.iter().zip(seg.values.iter()) {
                let _ = writeln!(out, "{} {}", p * 1e6, v);
            }
        }
        out
    }
}
