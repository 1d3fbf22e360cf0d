//! Reductions of benchtop logs: grid accuracy, repeatability, resolution and
//! force/deflection compliance.
//!
//! Each camera plane observes two of the three axes; cells for the unobserved
//! axis are reported as absent, never estimated.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::units::UM_PER_MM;

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];
const ALIGN_TOL_MM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraPlane {
    Xz,
    Yz,
    Xy,
}

impl CameraPlane {
    /// Axis indices of the two measured components `(m1, m2)`.
    pub fn axes(self) -> [usize; 2] {
        match self {
            CameraPlane::Xz => [0, 2],
            CameraPlane::Yz => [1, 2],
            CameraPlane::Xy => [0, 1],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CameraPlane::Xz => "xz",
            CameraPlane::Yz => "yz",
            CameraPlane::Xy => "xy",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s.trim() {
            "xz" => Some(CameraPlane::Xz),
            "yz" => Some(CameraPlane::Yz),
            "xy" => Some(CameraPlane::Xy),
            _ => None,
        }
    }

    /// Position of `axis` within the measured pair.
    fn slot(self, axis: usize) -> Option<usize> {
        self.axes().iter().position(|&a| a == axis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRecord {
    pub target_id: String,
    /// mm
    pub commanded: Vector3<f64>,
    pub plane: CameraPlane,
    /// µm, in the plane's axis order
    pub measured: [f64; 2],
    pub repeat: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridLog {
    pub records: Vec<GridRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdConvention {
    /// divide by n
    #[default]
    Population,
    /// divide by n − 1
    Sample,
}

/// Mean and standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64], convention: StdConvention) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let dof = match convention {
            StdConvention::Population => n,
            StdConvention::Sample => n.saturating_sub(1),
        };
        let std = if dof == 0 { 0.0 } else { (ss / dof as f64).sqrt() };
        Some(Self { mean, std, n })
    }
}

/// `cells[motion_axis][measured_axis]`, absent where no camera saw the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub nominal_step_mm: f64,
    pub cells: [[Option<Stat>; 3]; 3],
}

impl AccuracyReport {
    pub fn cell(&self, motion_axis: usize, measured_axis: usize) -> Option<Stat> {
        self.cells[motion_axis][measured_axis]
    }
}

/// Per-target, per-plane averages of the measured points.
struct TargetPoint {
    commanded: Vector3<f64>,
    plane: CameraPlane,
    mean_um: [f64; 2],
}

/// Group records by (target, plane), sorted so that reductions do not depend
/// on record order.
fn group(log: &GridLog) -> Result<BTreeMap<(String, CameraPlane), Vec<&GridRecord>>> {
    if log.records.is_empty() {
        return Err(ModelError::Bench("grid log is empty".into()));
    }
    let mut commanded: BTreeMap<&str, Vector3<f64>> = BTreeMap::new();
    let mut groups: BTreeMap<(String, CameraPlane), Vec<&GridRecord>> = BTreeMap::new();
    for r in &log.records {
        if !(r.commanded.iter().chain(&r.measured).all(|v| v.is_finite())) {
            return Err(ModelError::Bench(format!("target {}: non-finite value", r.target_id)));
        }
        let c = *commanded.entry(&r.target_id).or_insert(r.commanded);
        if (c - r.commanded).amax() > ALIGN_TOL_MM {
            return Err(ModelError::Bench(format!(
                "target {} has inconsistent commanded positions",
                r.target_id
            )));
        }
        groups.entry((r.target_id.clone(), r.plane)).or_default().push(r);
    }
    for recs in groups.values_mut() {
        recs.sort_by(|a, b| {
            a.repeat
                .cmp(&b.repeat)
                .then(a.measured[0].total_cmp(&b.measured[0]))
                .then(a.measured[1].total_cmp(&b.measured[1]))
        });
    }
    Ok(groups)
}

fn target_points(groups: &BTreeMap<(String, CameraPlane), Vec<&GridRecord>>) -> Vec<TargetPoint> {
    groups
        .values()
        .map(|recs| {
            let n = recs.len() as f64;
            let mut mean_um = [0.0; 2];
            for r in recs {
                mean_um[0] += r.measured[0];
                mean_um[1] += r.measured[1];
            }
            TargetPoint {
                commanded: recs[0].commanded,
                plane: recs[0].plane,
                mean_um: [mean_um[0] / n, mean_um[1] / n],
            }
        })
        .collect()
}

/// Axis along which `b − a` is a pure move, with its signed length (mm).
fn aligned_axis(a: &Vector3<f64>, b: &Vector3<f64>) -> Option<(usize, f64)> {
    let d = b - a;
    let moving: Vec<usize> = (0..3).filter(|&k| d[k].abs() > ALIGN_TOL_MM).collect();
    match moving.as_slice() {
        [k] => Some((*k, d[*k])),
        _ => None,
    }
}

pub fn grid_accuracy(log: &GridLog, nominal_step_mm: f64) -> Result<AccuracyReport> {
    grid_accuracy_with(log, nominal_step_mm, StdConvention::default())
}

/// Relative positioning error over every pair of targets seen in the same
/// plane and separated by exactly one nominal step along one axis.
pub fn grid_accuracy_with(
    log: &GridLog,
    nominal_step_mm: f64,
    convention: StdConvention,
) -> Result<AccuracyReport> {
    if !(nominal_step_mm.is_finite() && nominal_step_mm > 0.0) {
        return Err(ModelError::Bench("nominal step must be positive".into()));
    }
    let points = target_points(&group(log)?);
    let mut errors: [[Vec<f64>; 3]; 3] = Default::default();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.plane != b.plane {
                continue;
            }
            let Some((axis, delta)) = aligned_axis(&a.commanded, &b.commanded) else {
                continue;
            };
            if (delta.abs() - nominal_step_mm).abs() > ALIGN_TOL_MM {
                continue;
            }
            // orient each pair along the positive motion direction
            let sign = delta.signum();
            for (slot, &measured_axis) in a.plane.axes().iter().enumerate() {
                let moved = sign * (b.mean_um[slot] - a.mean_um[slot]);
                let intended = if measured_axis == axis { nominal_step_mm * UM_PER_MM } else { 0.0 };
                errors[axis][measured_axis].push((moved - intended).abs());
            }
        }
    }
    if errors.iter().flatten().all(Vec::is_empty) {
        return Err(ModelError::Bench(format!(
            "no aligned point pairs at {nominal_step_mm} mm spacing"
        )));
    }
    let mut cells = [[None; 3]; 3];
    for (m, row) in errors.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            cells[m][k] = Stat::of(v, convention);
        }
    }
    Ok(AccuracyReport { nominal_step_mm, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    pub convention: StdConvention,
    /// µm per axis; absent where no repeated target was observed.
    pub per_axis_um: [Option<f64>; 3],
    /// number of (target, plane) groups averaged per axis
    pub targets_per_axis: [usize; 3],
    /// Smallest commanded spacing (µm) resolved above twice the repeatability.
    pub resolution_um: [Option<f64>; 3],
    pub warnings: Vec<String>,
}

pub fn repeatability(log: &GridLog) -> Result<RepeatabilityReport> {
    repeatability_with(log, StdConvention::default())
}

/// Per-target standard deviation of repeated visits, averaged over targets.
pub fn repeatability_with(log: &GridLog, convention: StdConvention) -> Result<RepeatabilityReport> {
    let groups = group(log)?;
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    let mut warnings = Vec::new();
    for ((target, plane), recs) in &groups {
        if recs.len() < 2 {
            warnings.push(format!(
                "target {target} ({}) visited once; excluded",
                plane.label()
            ));
            continue;
        }
        for (slot, &axis) in plane.axes().iter().enumerate() {
            let values: Vec<f64> = recs.iter().map(|r| r.measured[slot]).collect();
            sums[axis] += Stat::of(&values, convention).map_or(0.0, |s| s.std);
            counts[axis] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(ModelError::Bench("no target has two or more repeats".into()));
    }
    let per_axis_um: [Option<f64>; 3] =
        std::array::from_fn(|k| (counts[k] > 0).then(|| sums[k] / counts[k] as f64));

    let points = target_points(&groups);
    let mut resolution_um: [Option<f64>; 3] = [None; 3];
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.plane != b.plane {
                continue;
            }
            let Some((axis, delta)) = aligned_axis(&a.commanded, &b.commanded) else {
                continue;
            };
            let (Some(slot), Some(rep)) = (a.plane.slot(axis), per_axis_um[axis]) else {
                continue;
            };
            let spacing = delta.abs() * UM_PER_MM;
            let separation = (b.mean_um[slot] - a.mean_um[slot]).abs();
            if separation > 2.0 * rep && resolution_um[axis].is_none_or(|r| spacing < r) {
                resolution_um[axis] = Some(spacing);
            }
        }
    }
    Ok(RepeatabilityReport {
        convention,
        per_axis_um,
        targets_per_axis: counts,
        resolution_um,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    /// s
    pub t: f64,
    /// N
    pub force: Vector3<f64>,
    /// µm
    pub displacement: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForceDeflectionLog {
    /// Tool-point position (X_p, Y_p) in mm, when known.
    pub position_mm: Option<[f64; 2]>,
    pub samples: Vec<TraceSample>,
}

impl ForceDeflectionLog {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(ModelError::Bench("trace needs at least two samples".into()));
        }
        for s in &self.samples {
            if !(s.t.is_finite()
                && s.force.iter().all(|v| v.is_finite())
                && s.displacement.iter().all(|v| v.is_finite()))
            {
                return Err(ModelError::Bench(format!("non-finite sample at t={}", s.t)));
            }
        }
        if let Some(w) = self.samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(ModelError::Bench(format!(
                "timestamps must increase: {} then {}",
                w[0].t, w[1].t
            )));
        }
        Ok(())
    }
}

/// Minimum force excursion (N) for a compliance fit on an axis.
pub const MIN_FORCE_SPAN_N: f64 = 1.0;

/// Least-squares slope magnitude of displacement against force on one axis (µm/N).
pub fn axis_compliance(log: &ForceDeflectionLog, axis: usize) -> Result<f64> {
    log.validate()?;
    let name = AXIS_NAMES
        .get(axis)
        .ok_or_else(|| ModelError::Bench(format!("axis index {axis} out of range")))?;
    let f: Vec<f64> = log.samples.iter().map(|s| s.force[axis]).collect();
    let d: Vec<f64> = log.samples.iter().map(|s| s.displacement[axis]).collect();
    let (lo, hi) = f
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < MIN_FORCE_SPAN_N {
        return Err(ModelError::Fit(format!(
            "axis {name}: force span {:.3} N is below {MIN_FORCE_SPAN_N} N",
            hi - lo
        )));
    }
    let n = f.len() as f64;
    let mf = f.iter().sum::<f64>() / n;
    let md = d.iter().sum::<f64>() / n;
    let sff: f64 = f.iter().map(|v| (v - mf).powi(2)).sum();
    let sfd: f64 = f.iter().zip(&d).map(|(a, b)| (a - mf) * (b - md)).sum();
    Ok((sfd / sff).abs())
}

/// Per-axis compliance `[C_x, C_y, C_z]` in µm/N.
pub fn compliance_from_trace(log: &ForceDeflectionLog) -> Result<[f64; 3]> {
    Ok([
        axis_compliance(log, 0)?,
        axis_compliance(log, 1)?,
        axis_compliance(log, 2)?,
    ])
}

pub const GRID_LOG_HEADER: [&str; 8] =
    ["target_id", "cx_mm", "cy_mm", "cz_mm", "plane", "m1_um", "m2_um", "repeat"];
pub const TRACE_HEADER: [&str; 7] = ["t_s", "fx_N", "fy_N", "fz_N", "dx_um", "dy_um", "dz_um"];

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let header = rdr
        .headers()
        .map_err(|e| ModelError::Bench(format!("{what}: {e}")))?;
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(ModelError::Bench(format!(
            "{what}: expected header {}, got {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    rec[i]
        .parse()
        .map_err(|_| ModelError::Bench(format!("{what} line {line}: bad value {:?}", &rec[i])))
}

pub fn read_grid_log<R: Read>(input: R) -> Result<GridLog> {
    const WHAT: &str = "grid log";
    let mut rdr = csv_reader(input);
    check_header(&mut rdr, &GRID_LOG_HEADER, WHAT)?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ModelError::Bench(format!("{WHAT}: {e}")))?;
        let plane = CameraPlane::from_label(&rec[4]).ok_or_else(|| {
            ModelError::Bench(format!("{WHAT}: unknown plane {:?}", &rec[4]))
        })?;
        records.push(GridRecord {
            target_id: rec[0].to_string(),
            commanded: Vector3::new(field(&rec, 1, WHAT)?, field(&rec, 2, WHAT)?, field(&rec, 3, WHAT)?),
            plane,
            measured: [field(&rec, 5, WHAT)?, field(&rec, 6, WHAT)?],
            repeat: field(&rec, 7, WHAT)?,
        });
    }
    Ok(GridLog { records })
}

pub fn write_grid_log<W: Write>(log: &GridLog, out: W) -> Result<()> {
    let io = |e: csv::Error| ModelError::Bench(format!("writing grid log: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_LOG_HEADER).map_err(io)?;
    for r in &log.records {
        w.write_record([
            r.target_id.clone(),
            r.commanded.x.to_string(),
            r.commanded.y.to_string(),
            r.commanded.z.to_string(),
            r.plane.label().to_string(),
            r.measured[0].to_string(),
            r.measured[1].to_string(),
            r.repeat.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| ModelError::Bench(format!("writing grid log: {e}")))
}

pub fn read_trace<R: Read>(input: R) -> Result<ForceDeflectionLog> {
    const WHAT: &str = "force trace";
    let mut rdr = csv_reader(input);
    check_header(&mut rdr, &TRACE_HEADER, WHAT)?;
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ModelError::Bench(format!("{WHAT}: {e}")))?;
        let v = (0..7).map(|i| field::<f64>(&rec, i, WHAT)).collect::<Result<Vec<_>>>()?;
        samples.push(TraceSample {
            t: v[0],
            force: Vector3::new(v[1], v[2], v[3]),
            displacement: Vector3::new(v[4], v[5], v[6]),
        });
    }
    Ok(ForceDeflectionLog { position_mm: None, samples })
}

pub fn write_trace<W: Write>(log: &ForceDeflectionLog, out: W) -> Result<()> {
    let io = |e: csv::Error| ModelError::Bench(format!("writing force trace: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(io)?;
    for s in &log.samples {
        let row = [
            s.t,
            s.force.x,
            s.force.y,
            s.force.z,
            s.displacement.x,
            s.displacement.y,
            s.displacement.z,
        ];
        w.write_record(row.iter().map(f64::to_string)).map_err(io)?;
    }
    w.flush().map_err(|e| ModelError::Bench(format!("writing force trace: {e}")))
}
