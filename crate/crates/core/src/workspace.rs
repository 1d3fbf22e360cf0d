//! Workspace sampling, workspace-averaged metrics and the design constraints.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::compliance::{torsional_compliance_with, ComplianceLaw, DeflectionModel};
use crate::error::{ModelError, Result};
use crate::kinematics::{
    condition_number, inverse_kinematics, jacobian, joint_swing_angles, DeltaParams,
    PlatformPose,
};

/// Cylindrical target workspace of the platform center.
///
/// The cylinder is centered on the design's home pose (see
/// [`DeltaParams::home_pose`]) shifted by `center_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSpec {
    pub diameter: f64,
    pub height: f64,
    pub center_offset: Vector3<f64>,
    pub step: f64,
}

impl Default for WorkspaceSpec {
    fn default() -> Self {
        Self {
            diameter: 55.0,
            height: 60.0,
            center_offset: Vector3::zeros(),
            step: 5.0,
        }
    }
}

impl WorkspaceSpec {
    pub fn with_step(self, step: f64) -> Self {
        Self { step, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("workspace diameter", self.diameter),
            ("workspace height", self.height),
            ("workspace step", self.step),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::domain(name, format!("must be positive, got {v}")));
            }
        }
        if !self.center_offset.iter().all(|c| c.is_finite()) {
            return Err(ModelError::domain("workspace center_offset", "must be finite"));
        }
        if self.step > self.diameter.min(self.height) {
            return Err(ModelError::EmptyWorkspace(format!(
                "step {} mm exceeds the smaller cylinder extent {} mm",
                self.step,
                self.diameter.min(self.height)
            )));
        }
        Ok(())
    }

    /// Sample poses for a given design.
    pub fn poses(&self, params: &DeltaParams) -> Result<Vec<PlatformPose>> {
        let origin = params.home_pose();
        Ok(sample_workspace(self)?
            .iter()
            .map(|o| origin.translated(o))
            .collect())
    }
}

/// Regular grid through the cylinder center, clipped to the cylinder.
///
/// Returns offsets from the design's home pose, ordered z-major, then y, then x.
pub fn sample_workspace(spec: &WorkspaceSpec) -> Result<Vec<Vector3<f64>>> {
    spec.validate()?;
    let r = 0.5 * spec.diameter;
    let half_h = 0.5 * spec.height;
    let tol = 1e-9 * spec.diameter.max(spec.height);
    let nxy = ((r + tol) / spec.step).floor() as i64;
    let nz = ((half_h + tol) / spec.step).floor() as i64;
    let mut out = Vec::new();
    for k in -nz..=nz {
        let z = k as f64 * spec.step;
        for j in -nxy..=nxy {
            let y = j as f64 * spec.step;
            for i in -nxy..=nxy {
                let x = i as f64 * spec.step;
                if x * x + y * y <= r * r + tol {
                    out.push(spec.center_offset + Vector3::new(x, y, z));
                }
            }
        }
    }
    if out.is_empty() {
        return Err(ModelError::EmptyWorkspace("no grid point inside the cylinder".into()));
    }
    Ok(out)
}

/// Global conditioning index: mean of `1/κ(J)` over the sampled workspace.
///
/// `κ` is the ratio of the extreme singular values of the inverse Jacobian.
/// Singular values are used rather than eigenvalues: `J` is not symmetric and
/// its eigenvalues need not be real.
pub fn gci(params: &DeltaParams, spec: &WorkspaceSpec) -> Result<f64> {
    let poses = spec.poses(params)?;
    let mut sum = 0.0;
    for pose in &poses {
        sum += 1.0 / condition_number(&jacobian(params, pose)?);
    }
    Ok(sum / poses.len() as f64)
}

/// Mean torsional compliance over the sampled workspace, deg/(N·m).
pub fn average_torsional_compliance(
    params: &DeltaParams,
    spec: &WorkspaceSpec,
    law: &ComplianceLaw,
    tau_ref_nm: f64,
) -> Result<f64> {
    law.validate()?;
    let poses = spec.poses(params)?;
    let mut sum = 0.0;
    for pose in &poses {
        let model = DeflectionModel::new(params, pose)?;
        sum += torsional_compliance_with(&model, law, tau_ref_nm)?;
    }
    Ok(sum / poses.len() as f64)
}

/// Thresholds of the four design constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintLimits {
    /// Required `r_b − r_p` (mm), strict.
    pub ring_clearance_mm: f64,
    /// Maximum slider travel (mm), strict.
    pub max_travel_mm: f64,
    /// Maximum spherical-joint swing (deg), strict.
    pub max_swing_deg: f64,
}

impl Default for ConstraintLimits {
    fn default() -> Self {
        Self {
            ring_clearance_mm: 30.0,
            max_travel_mm: 90.0,
            max_swing_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Some workspace sample is unreachable or singular.
    Reach,
    /// Platform would hit the ring rising from the base.
    RingCollision,
    Travel,
    Swing,
}

impl ConstraintKind {
    pub fn label(&self) -> &'static str {
        match self {
            ConstraintKind::Reach => "reach",
            ConstraintKind::RingCollision => "ring_collision",
            ConstraintKind::Travel => "travel",
            ConstraintKind::Swing => "swing",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "reach" => ConstraintKind::Reach,
            "ring_collision" => ConstraintKind::RingCollision,
            "travel" => ConstraintKind::Travel,
            "swing" => ConstraintKind::Swing,
            _ => return None,
        })
    }
}

/// A failed constraint with its worst value. For `Reach` the value is the
/// number of failing samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub value: f64,
    pub limit: f64,
}

/// Per-design kinematic survey of the workspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceSurvey {
    pub samples: usize,
    pub failed_samples: usize,
    pub max_travel_mm: Option<f64>,
    pub max_swing_deg: Option<f64>,
}

pub fn survey_workspace(params: &DeltaParams, spec: &WorkspaceSpec) -> Result<WorkspaceSurvey> {
    let poses = spec.poses(params)?;
    let mut failed = 0;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut swing: f64 = 0.0;
    for pose in &poses {
        let ok = inverse_kinematics(params, pose)
            .and_then(|q| jacobian(params, pose).map(|_| q))
            .and_then(|q| joint_swing_angles(params, pose).map(|s| (q, s)));
        match ok {
            Ok((q, s)) => {
                for i in 0..3 {
                    lo[i] = lo[i].min(q.q[i]);
                    hi[i] = hi[i].max(q.q[i]);
                    swing = swing.max(s[i]);
                }
            }
            Err(e) if e.is_infeasibility() => failed += 1,
            Err(e) => return Err(e),
        }
    }
    let all_ok = failed == 0;
    Ok(WorkspaceSurvey {
        samples: poses.len(),
        failed_samples: failed,
        max_travel_mm: all_ok.then(|| (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max)),
        max_swing_deg: all_ok.then_some(swing),
    })
}

/// Evaluate the four constraints. An empty list means the design is feasible.
pub fn constraint_check(
    params: &DeltaParams,
    spec: &WorkspaceSpec,
    limits: &ConstraintLimits,
) -> Result<Vec<Violation>> {
    Ok(violations_from_survey(params, &survey_workspace(params, spec)?, limits))
}

pub(crate) fn violations_from_survey(
    params: &DeltaParams,
    survey: &WorkspaceSurvey,
    limits: &ConstraintLimits,
) -> Vec<Violation> {
    let mut v = Vec::new();
    if survey.failed_samples > 0 {
        v.push(Violation {
            kind: ConstraintKind::Reach,
            value: survey.failed_samples as f64,
            limit: 0.0,
        });
    }
    let clearance = params.radial_gap();
    if !(clearance > limits.ring_clearance_mm) {
        v.push(Violation {
            kind: ConstraintKind::RingCollision,
            value: clearance,
            limit: limits.ring_clearance_mm,
        });
    }
    if let Some(t) = survey.max_travel_mm {
        if !(t < limits.max_travel_mm) {
            v.push(Violation {
                kind: ConstraintKind::Travel,
                value: t,
                limit: limits.max_travel_mm,
            });
        }
    }
    if let Some(s) = survey.max_swing_deg {
        if !(s < limits.max_swing_deg) {
            v.push(Violation {
                kind: ConstraintKind::Swing,
                value: s,
                limit: limits.max_swing_deg,
            });
        }
    }
    v
}

/// Feasibility verdict and objectives of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignScore {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub gci: Option<f64>,
    /// deg/(N·m)
    pub avg_torsional_compliance: Option<f64>,
    pub max_travel: Option<f64>,
    pub max_swing: Option<f64>,
}

impl DesignScore {
    pub fn violation_labels(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.kind.label()).collect()
    }
}
