//! TOML run configuration with defaults and all-at-once validation.

use std::fs;
use std::path::{Path, PathBuf};

use delta_core::bench::StdConvention;
use delta_core::compliance::ComplianceLaw;
use delta_core::kinematics::{DeltaParams, DEFAULT_RAIL_AZIMUTHS_DEG};
use delta_core::optimizer::{default_sr_joint_radius, EvaluationSettings, GridRange, ParameterGrid};
use delta_core::workspace::{ConstraintLimits, WorkspaceSpec};
use delta_core::ScalarizationWeights;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// link length (mm)
    #[serde(rename = "L")]
    pub link_length: f64,
    /// leg width (mm)
    pub w: f64,
    /// offset angle (deg)
    pub psi: f64,
    /// spherical-joint radius (mm); mutually exclusive with `r_p`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_sr: Option<f64>,
    /// platform radius (mm)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_p: Option<f64>,
    #[serde(default = "default_azimuths")]
    pub rail_azimuths_deg: [f64; 3],
}

fn default_azimuths() -> [f64; 3] {
    DEFAULT_RAIL_AZIMUTHS_DEG
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            link_length: 64.0,
            w: 40.0,
            psi: 27.0,
            r_sr: None,
            r_p: None,
            rail_azimuths_deg: DEFAULT_RAIL_AZIMUTHS_DEG,
        }
    }
}

impl DesignConfig {
    pub fn to_params(&self) -> Result<DeltaParams, CliError> {
        let p = match self.r_p {
            Some(r_p) => DeltaParams::from_platform_radius(self.link_length, self.w, self.psi, r_p),
            None => DeltaParams::derive(
                self.link_length,
                self.w,
                self.psi,
                self.r_sr.unwrap_or_else(default_sr_joint_radius),
            ),
        }?;
        Ok(p.with_rail_azimuths_deg(self.rail_azimuths_deg)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L", default = "default_l_range")]
    pub link_length: GridRange,
    #[serde(default = "default_w_range")]
    pub w: GridRange,
    #[serde(default = "default_psi_range")]
    pub psi: GridRange,
    #[serde(default = "default_sr_joint_radius")]
    pub r_sr: f64,
}

fn default_l_range() -> GridRange {
    ParameterGrid::default().link_length
}
fn default_w_range() -> GridRange {
    ParameterGrid::default().leg_width
}
fn default_psi_range() -> GridRange {
    ParameterGrid::default().offset_angle
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = ParameterGrid::default();
        Self {
            link_length: g.link_length,
            w: g.leg_width,
            psi: g.offset_angle,
            r_sr: g.sr_joint_radius,
        }
    }
}

impl GridConfig {
    pub fn to_grid(&self) -> ParameterGrid {
        ParameterGrid {
            link_length: self.link_length,
            leg_width: self.w,
            offset_angle: self.psi,
            sr_joint_radius: self.r_sr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub diameter: f64,
    pub height: f64,
    pub center_offset: [f64; 3],
    pub step: f64,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        let w = WorkspaceSpec::default();
        Self {
            diameter: w.diameter,
            height: w.height,
            center_offset: w.center_offset.into(),
            step: w.step,
        }
    }
}

impl WorkspaceConfig {
    pub fn to_spec(&self) -> WorkspaceSpec {
        WorkspaceSpec {
            diameter: self.diameter,
            height: self.height,
            center_offset: Vector3::from(self.center_offset),
            step: self.step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawConfig {
    Power { a: f64, b: f64 },
    Linear { c: f64 },
    /// Identify the law from a (link, force_N, deflection_um) pairs file.
    Fit { pairs: PathBuf },
}

impl Default for LawConfig {
    fn default() -> Self {
        match ComplianceLaw::IDENTIFIED {
            ComplianceLaw::Power { a, b } => LawConfig::Power { a, b },
            ComplianceLaw::Linear { c } => LawConfig::Linear { c },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintsConfig {
    pub ring_clearance_mm: f64,
    pub max_travel_mm: f64,
    pub max_swing_deg: f64,
}

impl Default for ConstraintsConfig {
    fn default() -> Self {
        let c = ConstraintLimits::default();
        Self {
            ring_clearance_mm: c.ring_clearance_mm,
            max_travel_mm: c.max_travel_mm,
            max_swing_deg: c.max_swing_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        let w = ScalarizationWeights::default();
        Self { alpha: w.alpha, beta: w.beta }
    }
}

/// Per-subcommand inputs. Positions are absolute in the base frame (mm);
/// an omitted pose means the design's home pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsConfig {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub poses: Vec<[f64; 3]>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<[f64; 3]>,
    #[serde(rename = "force_N")]
    pub force_n: [f64; 3],
    #[serde(rename = "torque_Nm")]
    pub torque_nm: [f64; 3],
    /// columns `tau_z_Nm,dtheta_z_deg`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torsion_log: Option<PathBuf>,
    pub spring_preload: bool,
    /// columns `link,force_N,deflection_um`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_log: Option<PathBuf>,
    pub nominal_step_mm: f64,
    pub std_convention: StdConvention,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_position_mm: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(rename = "tau_ref_Nm")]
    pub tau_ref_nm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    pub workspace: WorkspaceConfig,
    pub law: LawConfig,
    pub weights: WeightsConfig,
    pub constraints: ConstraintsConfig,
    pub inputs: InputsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: None,
            tau_ref_nm: 1.0,
            design: None,
            grid: None,
            workspace: WorkspaceConfig::default(),
            law: LawConfig::default(),
            weights: WeightsConfig::default(),
            constraints: ConstraintsConfig::default(),
            inputs: InputsConfig::default(),
        }
    }
}

impl Default for InputsConfig {
    fn default() -> Self {
        Self {
            poses: Vec::new(),
            joints: Vec::new(),
            force_n: [0.0; 3],
            torque_nm: [0.0; 3],
            torsion_log: None,
            spring_preload: false,
            pairs: None,
            grid_log: None,
            nominal_step_mm: 5.0,
            std_convention: StdConvention::Population,
            trace: None,
            trace_position_mm: None,
        }
    }
}

impl RunConfig {
    /// The single design, defaulting to (L=64, w=40, ψ=27°).
    pub fn design_or_default(&self) -> DesignConfig {
        self.design.clone().unwrap_or_default()
    }

    /// The grid; a single design becomes a one-point grid.
    pub fn grid_or_default(&self) -> GridConfig {
        match (&self.grid, &self.design) {
            (Some(g), _) => g.clone(),
            (None, Some(d)) => GridConfig {
                link_length: GridRange::single(d.link_length),
                w: GridRange::single(d.w),
                psi: GridRange::single(d.psi),
                r_sr: d.to_params().map(|p| p.sr_joint_radius).unwrap_or_else(|_| default_sr_joint_radius()),
            },
            (None, None) => GridConfig::default(),
        }
    }

    pub fn limits(&self) -> ConstraintLimits {
        ConstraintLimits {
            ring_clearance_mm: self.constraints.ring_clearance_mm,
            max_travel_mm: self.constraints.max_travel_mm,
            max_swing_deg: self.constraints.max_swing_deg,
        }
    }

    pub fn weights(&self) -> ScalarizationWeights {
        ScalarizationWeights {
            alpha: self.weights.alpha,
            beta: self.weights.beta,
        }
    }

    /// Settings with a non-fit law; fit laws are resolved by the caller.
    pub fn settings(&self, law: ComplianceLaw) -> EvaluationSettings {
        EvaluationSettings {
            workspace: self.workspace.to_spec(),
            law,
            tau_ref_nm: self.tau_ref_nm,
            limits: self.limits(),
        }
    }

    /// Paths relative to the config file are resolved against its directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut self.inputs;
        for p in [&mut i.torsion_log, &mut i.pairs, &mut i.grid_log, &mut i.trace]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let LawConfig::Fit { pairs } = &mut self.law {
            fix(pairs);
        }
        if let Some(out) = &mut self.out_dir {
            fix(out);
        }
    }

    /// Every semantic problem, each prefixed by its field name.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        fn positive(errs: &mut Vec<String>, name: &str, v: f64) {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name}: must be positive, got {v}"));
            }
        }
        if !(self.tau_ref_nm.is_finite() && self.tau_ref_nm != 0.0) {
            errs.push(format!("tau_ref_Nm: must be finite and non-zero, got {}", self.tau_ref_nm));
        }
        positive(&mut errs, "workspace.diameter", self.workspace.diameter);
        positive(&mut errs, "workspace.height", self.workspace.height);
        positive(&mut errs, "workspace.step", self.workspace.step);
        positive(&mut errs, "inputs.nominal_step_mm", self.inputs.nominal_step_mm);
        if let Some(d) = &self.design {
            positive(&mut errs, "L", d.link_length);
            positive(&mut errs, "w", d.w);
            if !(d.psi > 0.0 && d.psi < 90.0) {
                errs.push(format!("psi: must lie strictly between 0 and 90 deg, got {}", d.psi));
            }
            match (d.r_sr, d.r_p) {
                (Some(_), Some(_)) => errs.push("design: give r_sr or r_p, not both".into()),
                (Some(r), None) => positive(&mut errs, "r_sr", r),
                (None, Some(r)) => positive(&mut errs, "r_p", r),
                (None, None) => {}
            }
        }
        if let Some(g) = &self.grid {
            for (name, r) in [("L", &g.link_length), ("w", &g.w), ("psi", &g.psi)] {
                if !(r.start.is_finite() && r.start > 0.0) {
                    errs.push(format!("grid.{name}: start must be positive, got {}", r.start));
                }
                if !(r.step.is_finite() && r.step > 0.0) {
                    errs.push(format!("grid.{name}: step must be positive, got {}", r.step));
                }
                if !(r.start <= r.stop) {
                    errs.push(format!("grid.{name}: start {} exceeds stop {}", r.start, r.stop));
                }
            }
            if !(g.psi.stop < 90.0) {
                errs.push(format!("grid.psi: stop must be below 90 deg, got {}", g.psi.stop));
            }
            positive(&mut errs, "grid.r_sr", g.r_sr);
        }
        if self.design.is_some() && self.grid.is_some() {
            errs.push("design/grid: give a single design or a grid, not both".into());
        }
        if !self.workspace.center_offset.iter().all(|v| v.is_finite()) {
            errs.push("workspace.center_offset: must be finite".into());
        }
        match &self.law {
            LawConfig::Power { a, b } => {
                if !(a.is_finite() && *a > 0.0) {
                    errs.push(format!("law.a: must be positive, got {a}"));
                }
                if !(b.is_finite() && *b > 0.0 && *b <= 1.5) {
                    errs.push(format!("law.b: must lie in (0, 1.5], got {b}"));
                }
            }
            LawConfig::Linear { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    errs.push(format!("law.c: must be positive, got {c}"));
                }
            }
            LawConfig::Fit { pairs } => {
                if !pairs.is_file() {
                    errs.push(format!("law.pairs: file {} does not exist", pairs.display()));
                }
            }
        }
        let w = &self.weights;
        if !(w.alpha >= 0.0 && w.beta >= 0.0 && (w.alpha + w.beta - 1.0).abs() < 1e-9) {
            errs.push(format!(
                "weights: alpha and beta must be non-negative and sum to 1, got {} and {}",
                w.alpha, w.beta
            ));
        }
        let c = &self.constraints;
        if !c.ring_clearance_mm.is_finite() {
            errs.push("constraints.ring_clearance_mm: must be finite".into());
        }
        if !c.max_travel_mm.is_finite() {
            errs.push("constraints.max_travel_mm: must be finite".into());
        }
        if !c.max_swing_deg.is_finite() {
            errs.push("constraints.max_swing_deg: must be finite".into());
        }
        let i = &self.inputs;
        for (name, p) in [
            ("inputs.torsion_log", &i.torsion_log),
            ("inputs.pairs", &i.pairs),
            ("inputs.grid_log", &i.grid_log),
            ("inputs.trace", &i.trace),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    errs.push(format!("{name}: file {} does not exist", p.display()));
                }
            }
        }
        errs
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

/// Parse and validate a config from TOML text; relative paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
    cfg.resolve_paths(base);
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(errs))
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let base = fs::canonicalize(parent)
        .map_err(|e| CliError::Config(vec![format!("{}: {e}", parent.display())]))?;
    parse_config_str(&text, &base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.grid_or_default().to_grid(), ParameterGrid::default());
        let d = cfg.design_or_default().to_params().unwrap();
        assert_eq!((d.link_length, d.leg_width), (64.0, 40.0));
        assert_eq!(cfg.settings(ComplianceLaw::IDENTIFIED), EvaluationSettings::default());
    }

    #[test]
    fn negative_l_is_named() {
        let Err(CliError::Config(errs)) = parse("[design]\nL = -1\nw = 40\npsi = 27\n") else {
            panic!()
        };
        assert!(errs.iter().any(|e| e.starts_with("L:")), "{errs:?}");
    }

    #[test]
    fn all_violations_reported_together() {
        let text = "tau_ref_Nm = 0\n[design]\nL = -1\nw = 0\npsi = 95\n[weights]\nalpha = 0.9\nbeta = 0.9\n";
        let Err(CliError::Config(errs)) = parse(text) else { panic!() };
        assert!(errs.len() >= 5, "{errs:?}");
    }

    #[test]
    fn design_and_grid_are_exclusive() {
        let Err(CliError::Config(errs)) = parse("[design]\nL = 64\nw = 40\npsi = 27\n[grid]\n") else {
            panic!()
        };
        assert!(errs.iter().any(|e| e.contains("not both")));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse("bogus = 1\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn round_trip() {
        let text = r#"
tau_ref_Nm = 0.5
[grid]
L = { start = 60, step = 4, stop = 68 }
[law]
kind = "linear"
c = 2.5
[constraints]
ring_clearance_mm = 29
[inputs]
poses = [[0, 0, 60]]
"#;
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.grid.as_ref().unwrap().link_length.stop, 68.0);
        let again = parse(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }
}
