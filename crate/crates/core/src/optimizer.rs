//! Exhaustive design sweep over (L, w, ψ), Pareto filtering and selection.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compliance::ComplianceLaw;
use crate::error::{ModelError, Result};
use crate::kinematics::{sr_radius_for, DeltaParams};
use crate::workspace::{
    average_torsional_compliance, gci, survey_workspace, violations_from_survey, ConstraintKind,
    ConstraintLimits, DesignScore, Violation, WorkspaceSpec,
};

/// Inclusive `start:step:stop` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl GridRange {
    pub const fn new(start: f64, step: f64, stop: f64) -> Self {
        Self { start, step, stop }
    }

    pub fn single(v: f64) -> Self {
        Self::new(v, 1.0, v)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.start.is_finite() && self.step.is_finite() && self.stop.is_finite()) {
            return Err(ModelError::Config(format!("{name}: range must be finite")));
        }
        if self.step <= 0.0 {
            return Err(ModelError::Config(format!("{name}: step must be positive")));
        }
        if self.start > self.stop {
            return Err(ModelError::Config(format!("{name}: start exceeds stop")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.value(k))
    }

    /// Index of `v` on this range, if it lies on a grid node.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        let k = ((v - self.start) / self.step).round();
        (k >= 0.0 && (k as usize) < self.len() && (self.value(k as usize) - v).abs() < 1e-9)
            .then_some(k as usize)
    }
}

/// Joint radius implied by the pre-optimization design (w = 25 mm, r_p = 24.9 mm).
pub fn default_sr_joint_radius() -> f64 {
    sr_radius_for(25.0, 24.9).expect("constant geometry is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    /// mm
    pub link_length: GridRange,
    /// mm
    pub leg_width: GridRange,
    /// deg
    pub offset_angle: GridRange,
    /// mm
    pub sr_joint_radius: f64,
}

impl Default for ParameterGrid {
    fn default() -> Self {
        Self {
            link_length: GridRange::new(60.0, 2.0, 90.0),
            leg_width: GridRange::new(25.0, 5.0, 40.0),
            offset_angle: GridRange::new(18.0, 1.0, 32.0),
            sr_joint_radius: default_sr_joint_radius(),
        }
    }
}

impl ParameterGrid {
    pub fn validate(&self) -> Result<()> {
        self.link_length.validate("link_length")?;
        self.leg_width.validate("leg_width")?;
        self.offset_angle.validate("offset_angle")?;
        if !(self.sr_joint_radius.is_finite() && self.sr_joint_radius > 0.0) {
            return Err(ModelError::Config("sr_joint_radius must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.link_length.len() * self.leg_width.len() * self.offset_angle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid indices (L, w, ψ) of a design lying on this grid.
    pub fn indices_of(&self, p: &DeltaParams) -> Option<(usize, usize, usize)> {
        Some((
            self.link_length.index_of(p.link_length)?,
            self.leg_width.index_of(p.leg_width)?,
            self.offset_angle.index_of(p.offset_angle_deg())?,
        ))
    }
}

/// All designs of the grid in L-major, then w, then ψ order.
pub fn enumerate_grid(grid: &ParameterGrid) -> Result<Vec<DeltaParams>> {
    grid.validate()?;
    let mut out = Vec::with_capacity(grid.len());
    for l in grid.link_length.values() {
        for w in grid.leg_width.values() {
            for psi in grid.offset_angle.values() {
                out.push(
                    DeltaParams::derive(l, w, psi, grid.sr_joint_radius)
                        .map_err(|e| ModelError::Config(format!("grid point ({l}, {w}, {psi}): {e}")))?,
                );
            }
        }
    }
    Ok(out)
}

/// Everything a design evaluation depends on besides the design itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSettings {
    pub workspace: WorkspaceSpec,
    pub law: ComplianceLaw,
    /// N·m
    pub tau_ref_nm: f64,
    pub limits: ConstraintLimits,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            workspace: WorkspaceSpec::default(),
            law: ComplianceLaw::IDENTIFIED,
            tau_ref_nm: 1.0,
            limits: ConstraintLimits::default(),
        }
    }
}

impl EvaluationSettings {
    pub fn validate(&self) -> Result<()> {
        self.workspace.validate()?;
        self.law.validate()?;
        if !self.tau_ref_nm.is_finite() || self.tau_ref_nm == 0.0 {
            return Err(ModelError::Config("tau_ref must be finite and non-zero".into()));
        }
        Ok(())
    }
}

/// Constraints first; objectives only for feasible designs.
pub fn evaluate_design(params: &DeltaParams, settings: &EvaluationSettings) -> Result<DesignScore> {
    settings.validate()?;
    let survey = survey_workspace(params, &settings.workspace)?;
    let mut violations = violations_from_survey(params, &survey, &settings.limits);
    let mut score = DesignScore {
        feasible: false,
        violations: Vec::new(),
        gci: None,
        avg_torsional_compliance: None,
        max_travel: survey.max_travel_mm,
        max_swing: survey.max_swing_deg,
    };
    if violations.is_empty() {
        let objectives = gci(params, &settings.workspace).and_then(|g| {
            average_torsional_compliance(params, &settings.workspace, &settings.law, settings.tau_ref_nm)
                .map(|t| (g, t))
        });
        match objectives {
            Ok((g, t)) => {
                score.gci = Some(g);
                score.avg_torsional_compliance = Some(t);
            }
            Err(e) if e.is_infeasibility() => violations.push(Violation {
                kind: ConstraintKind::Reach,
                value: 1.0,
                limit: 0.0,
            }),
            Err(e) => return Err(e),
        }
    }
    score.feasible = violations.is_empty();
    score.violations = violations;
    Ok(score)
}

/// Non-dominated feasible designs (higher GCI, lower compliance). Ties are kept.
pub fn pareto_filter(scores: &[DesignScore]) -> Result<Vec<usize>> {
    let objectives: Vec<(usize, f64, f64)> = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match (s.feasible, s.gci, s.avg_torsional_compliance) {
            (true, Some(g), Some(t)) => Some((i, g, t)),
            _ => None,
        })
        .collect();
    if objectives.is_empty() {
        return Err(ModelError::Config("no feasible design: Pareto front is empty".into()));
    }
    Ok(objectives
        .iter()
        .filter(|&&(_, g, t)| {
            !objectives
                .iter()
                .any(|&(_, g2, t2)| g2 >= g && t2 <= t && (g2 > g || t2 < t))
        })
        .map(|&(i, _, _)| i)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ScalarizationWeights {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.5 }
    }
}

impl ScalarizationWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && (self.alpha + self.beta - 1.0).abs() < 1e-9) {
            return Err(ModelError::Config(format!(
                "weights must be non-negative and sum to 1, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Pick one front member maximizing `α·ĝ − β·t̂` over min-max normalized
/// objectives (bounds from the whole feasible set; a constant objective
/// normalizes to 0.5). Ties go to higher GCI, then shorter links.
pub fn select_design(
    designs: &[DeltaParams],
    scores: &[DesignScore],
    front: &[usize],
    weights: &ScalarizationWeights,
) -> Result<usize> {
    weights.validate()?;
    if front.is_empty() {
        return Err(ModelError::Config("cannot select from an empty front".into()));
    }
    let feasible: Vec<(f64, f64)> = scores
        .iter()
        .filter_map(|s| Some((s.gci?, s.avg_torsional_compliance?)))
        .collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        feasible
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (g_lo, g_hi) = bounds(|p| p.0);
    let (t_lo, t_hi) = bounds(|p| p.1);
    let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };

    let mut best: Option<(usize, f64)> = None;
    for &i in front {
        let s = &scores[i];
        let (Some(g), Some(t)) = (s.gci, s.avg_torsional_compliance) else {
            return Err(ModelError::Config(format!("front member {i} has no objectives")));
        };
        let value = weights.alpha * norm(g, g_lo, g_hi) - weights.beta * norm(t, t_lo, t_hi);
        let better = match best {
            None => true,
            Some((j, bv)) => {
                let gj = scores[j].gci.unwrap_or(f64::NEG_INFINITY);
                value > bv
                    || (value == bv && g > gj)
                    || (value == bv && g == gj && designs[i].link_length < designs[j].link_length)
            }
        };
        if better {
            best = Some((i, value));
        }
    }
    Ok(best.map(|(i, _)| i).expect("front is non-empty"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: ParameterGrid,
    pub settings: EvaluationSettings,
    pub weights: ScalarizationWeights,
    pub designs: Vec<DeltaParams>,
    pub scores: Vec<DesignScore>,
    /// Empty when no design is feasible.
    pub pareto: Vec<usize>,
    pub selected: Option<usize>,
}

impl SweepResult {
    pub fn feasible_count(&self) -> usize {
        self.scores.iter().filter(|s| s.feasible).count()
    }

    /// True when some front member is within one grid step of `d` along every axis.
    pub fn near_front(&self, d: &DeltaParams) -> bool {
        let Some((a, b, c)) = self.grid.indices_of(d) else {
            return false;
        };
        self.pareto.iter().any(|&i| {
            self.grid.indices_of(&self.designs[i]).is_some_and(|(x, y, z)| {
                x.abs_diff(a) <= 1 && y.abs_diff(b) <= 1 && z.abs_diff(c) <= 1
            })
        })
    }
}

/// Evaluate every grid design in parallel; `threads` only affects speed.
pub fn run_sweep(
    grid: &ParameterGrid,
    settings: &EvaluationSettings,
    weights: &ScalarizationWeights,
    threads: Option<usize>,
) -> Result<SweepResult> {
    settings.validate()?;
    weights.validate()?;
    let designs = enumerate_grid(grid)?;
    let evaluate = || -> Result<Vec<DesignScore>> {
        designs
            .par_iter()
            .map(|d| evaluate_design(d, settings))
            .collect()
    };
    let scores = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ModelError::Config(format!("thread pool: {e}")))?
            .install(evaluate)?,
        None => evaluate()?,
    };
    let (pareto, selected) = match pareto_filter(&scores) {
        Ok(front) => {
            let sel = select_design(&designs, &scores, &front, weights)?;
            (front, Some(sel))
        }
        Err(_) => (Vec::new(), None),
    };
    Ok(SweepResult {
        grid: *grid,
        settings: *settings,
        weights: *weights,
        designs,
        scores,
        pareto,
        selected,
    })
}

pub const SWEEP_CSV_HEADER: [&str; 11] = [
    "L",
    "w",
    "psi",
    "r_p",
    "r_b",
    "feasible",
    "violations",
    "gci",
    "tc_avg",
    "max_travel_mm",
    "max_swing_deg",
];

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub link_length: f64,
    pub leg_width: f64,
    pub offset_angle_deg: f64,
    pub platform_radius: f64,
    pub base_radius: f64,
    pub feasible: bool,
    pub violations: Vec<ConstraintKind>,
    pub gci: Option<f64>,
    pub tc_avg: Option<f64>,
    pub max_travel_mm: Option<f64>,
    pub max_swing_deg: Option<f64>,
}

impl SweepRow {
    pub fn new(d: &DeltaParams, s: &DesignScore) -> Self {
        Self {
            link_length: d.link_length,
            leg_width: d.leg_width,
            offset_angle_deg: d.offset_angle_deg(),
            platform_radius: d.platform_radius,
            base_radius: d.base_radius,
            feasible: s.feasible,
            violations: s.violations.iter().map(|v| v.kind).collect(),
            gci: s.gci,
            tc_avg: s.avg_torsional_compliance,
            max_travel_mm: s.max_travel,
            max_swing_deg: s.max_swing,
        }
    }
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.designs
            .iter()
            .zip(&self.scores)
            .map(|(d, s)| SweepRow::new(d, s))
            .collect()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write sweep rows as CSV. Floats use the shortest exact representation.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let io = |e: csv::Error| ModelError::Config(format!("writing sweep csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER).map_err(io)?;
    for r in rows {
        let violations: Vec<&str> = r.violations.iter().map(|k| k.label()).collect();
        w.write_record([
            r.link_length.to_string(),
            r.leg_width.to_string(),
            r.offset_angle_deg.to_string(),
            r.platform_radius.to_string(),
            r.base_radius.to_string(),
            r.feasible.to_string(),
            violations.join(";"),
            opt(r.gci),
            opt(r.tc_avg),
            opt(r.max_travel_mm),
            opt(r.max_swing_deg),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| ModelError::Config(format!("writing sweep csv: {e}")))?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let bad = |msg: String| ModelError::Config(format!("reading sweep csv: {msg}"));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != SWEEP_CSV_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let violations = rec[6]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| ConstraintKind::from_label(s).ok_or_else(|| bad(format!("unknown violation {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(SweepRow {
            link_length: num(&rec[0])?,
            leg_width: num(&rec[1])?,
            offset_angle_deg: num(&rec[2])?,
            platform_radius: num(&rec[3])?,
            base_radius: num(&rec[4])?,
            feasible: rec[5].parse().map_err(|_| bad(format!("bad flag {:?}", &rec[5])))?,
            violations,
            gci: opt_num(&rec[7])?,
            tc_avg: opt_num(&rec[8])?,
            max_travel_mm: opt_num(&rec[9])?,
            max_swing_deg: opt_num(&rec[10])?,
        });
    }
    Ok(rows)
}
