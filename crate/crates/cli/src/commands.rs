//! Subcommand implementations and artifact emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use delta_core::bench::{
    compliance_from_trace, grid_accuracy_with, read_grid_log, read_trace, repeatability_with,
};
use delta_core::compliance::{
    reduce_torsion_experiment, ComplianceLaw, DeflectionModel, ForcePair, TorsionExperiment,
    Wrench,
};
use delta_core::fit::{fit_compliance_law, sample_curve, FitReport};
use delta_core::kinematics::{
    condition_number, forward_kinematics, inverse_kinematics, jacobian, DeltaParams,
    JointPositions, PlatformPose,
};
use delta_core::optimizer::{run_sweep, write_sweep_csv, SweepResult};
use delta_core::units::nm_to_nmm;
use delta_core::workspace::{gci, sample_workspace};
use nalgebra::Vector3;
use toml::{Table, Value};

use crate::config::{LawConfig, RunConfig};
use crate::error::CliError;
use crate::io::{open, read_pairs, read_torsion_log, write_pairs};

pub const TOOL_NAME: &str = "delta-stage";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Ik,
    Fk,
    Gci,
    Deflect,
    Reduce,
    Fit,
    Sweep,
    BenchAccuracy,
    BenchRepeat,
    BenchCompliance,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ik => "ik",
            Command::Fk => "fk",
            Command::Gci => "gci",
            Command::Deflect => "deflect",
            Command::Reduce => "reduce",
            Command::Fit => "fit",
            Command::Sweep => "sweep",
            Command::BenchAccuracy => "bench-accuracy",
            Command::BenchRepeat => "bench-repeat",
            Command::BenchCompliance => "bench-compliance",
        }
    }
}

/// Structured summary plus the artifacts written next to it.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: Command,
    pub results: Table,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
    /// Config as actually used, with the design or grid filled in.
    pub resolved: RunConfig,
}

impl Report {
    /// Summary TOML; the timestamp honors `SOURCE_DATE_EPOCH`.
    pub fn summary_toml(&self) -> String {
        let generated = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse::<i64>().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs() as i64)
            });
        let mut tool = Table::new();
        tool.insert("name".into(), TOOL_NAME.into());
        tool.insert("version".into(), TOOL_VERSION.into());
        tool.insert("command".into(), self.command.name().into());
        tool.insert("generated_unix_s".into(), generated.into());
        let mut doc = Table::new();
        doc.insert(
            "warnings".into(),
            Value::Array(self.warnings.iter().map(|w| w.as_str().into()).collect()),
        );
        doc.insert("tool".into(), tool.into());
        doc.insert("results".into(), self.results.clone().into());
        let config = Table::try_from(&self.resolved).expect("config serializes to a table");
        doc.insert("config".into(), config.into());
        toml::to_string(&doc).expect("summary serializes")
    }
}

fn vec3(v: &Vector3<f64>) -> Value {
    Value::Array(v.iter().map(|&x| x.into()).collect())
}

fn create(dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf), CliError> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| CliError::input(path.display(), e))?;
    Ok((BufWriter::new(f), path))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::input(path.display(), e))
}

/// Write a CSV with `#` comment lines before the header.
fn write_table(
    dir: &Path,
    name: &str,
    comments: &[&str],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<PathBuf, CliError> {
    let (mut w, path) = create(dir, name)?;
    let io = |e: std::io::Error| CliError::input(path.display(), e);
    for c in comments {
        writeln!(w, "# {c}").map_err(io)?;
    }
    {
        let mut csvw = csv::Writer::from_writer(&mut w);
        let err = |e: csv::Error| CliError::input(path.display(), e);
        csvw.write_record(header).map_err(err)?;
        for r in rows {
            csvw.write_record(r).map_err(err)?;
        }
        csvw.flush().map_err(io)?;
    }
    finish(w, &path)?;
    Ok(path)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Resolve the compliance law, fitting it from the pairs file when asked.
pub fn resolve_law(cfg: &RunConfig) -> Result<ComplianceLaw, CliError> {
    let law = match &cfg.law {
        LawConfig::Power { a, b } => ComplianceLaw::Power { a: *a, b: *b },
        LawConfig::Linear { c } => ComplianceLaw::Linear { c: *c },
        LawConfig::Fit { pairs } => fit_compliance_law(&read_pairs(open(pairs)?)?)?.law,
    };
    law.validate()?;
    Ok(law)
}

fn single_design(cfg: &RunConfig, command: Command) -> Result<(DeltaParams, RunConfig), CliError> {
    if cfg.grid.is_some() {
        return Err(CliError::Config(vec![format!(
            "grid: `{}` needs a single design, not a grid",
            command.name()
        )]));
    }
    let mut resolved = cfg.clone();
    let design = cfg.design_or_default();
    let params = design.to_params()?;
    resolved.design = Some(design);
    Ok((params, resolved))
}

fn poses(cfg: &RunConfig, params: &DeltaParams) -> Vec<PlatformPose> {
    if cfg.inputs.poses.is_empty() {
        vec![params.home_pose()]
    } else {
        cfg.inputs.poses.iter().map(|p| PlatformPose::new(p[0], p[1], p[2])).collect()
    }
}

fn require<'a>(p: &'a Option<PathBuf>, field: &str, command: Command) -> Result<&'a PathBuf, CliError> {
    p.as_ref().ok_or_else(|| {
        CliError::Config(vec![format!("inputs.{field}: required by `{}`", command.name())])
    })
}

pub struct DispatchOptions {
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

/// Run one subcommand, write its artifacts and `summary.toml` into the output directory.
pub fn dispatch(command: Command, cfg: &RunConfig, opts: &DispatchOptions) -> Result<Report, CliError> {
    let dir = &opts.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::input(dir.display(), e))?;
    let mut report = match command {
        Command::Ik => run_ik(cfg, dir)?,
        Command::Fk => run_fk(cfg, dir)?,
        Command::Gci => run_gci(cfg, dir)?,
        Command::Deflect => run_deflect(cfg, dir)?,
        Command::Reduce => run_reduce(cfg, dir)?,
        Command::Fit => run_fit(cfg, dir)?,
        Command::Sweep => run_sweep_command(cfg, dir, opts.threads)?,
        Command::BenchAccuracy => run_bench_accuracy(cfg, dir)?,
        Command::BenchRepeat => run_bench_repeat(cfg, dir)?,
        Command::BenchCompliance => run_bench_compliance(cfg, dir)?,
    };
    let (mut w, path) = create(dir, "summary.toml")?;
    w.write_all(report.summary_toml().as_bytes())
        .map_err(|e| CliError::input(path.display(), e))?;
    finish(w, &path)?;
    report.files.push(path);
    Ok(report)
}

fn report(command: Command, resolved: RunConfig) -> Report {
    Report {
        command,
        results: Table::new(),
        warnings: Vec::new(),
        files: Vec::new(),
        resolved,
    }
}

fn run_ik(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let (params, resolved) = single_design(cfg, Command::Ik)?;
    let mut rows = Vec::new();
    for pose in poses(cfg, &params) {
        let q = inverse_kinematics(&params, &pose)?;
        let p = pose.position;
        rows.push([p.x, p.y, p.z, q.q[0], q.q[1], q.q[2]].map(|v| v.to_string()).to_vec());
    }
    let mut r = report(Command::Ik, resolved);
    r.results.insert("poses".into(), (rows.len() as i64).into());
    r.files.push(write_table(
        dir,
        "ik.csv",
        &["platform position (mm, base frame) and slider positions along each rail (mm)"],
        &["x_mm", "y_mm", "z_mm", "q1_mm", "q2_mm", "q3_mm"],
        &rows,
    )?);
    Ok(r)
}

fn run_fk(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let (params, resolved) = single_design(cfg, Command::Fk)?;
    let joints = if cfg.inputs.joints.is_empty() { vec![[0.0; 3]] } else { cfg.inputs.joints.clone() };
    let mut rows = Vec::new();
    for q in joints {
        let p = forward_kinematics(&params, &JointPositions { q })?.position;
        rows.push([q[0], q[1], q[2], p.x, p.y, p.z].map(|v| v.to_string()).to_vec());
    }
    let mut r = report(Command::Fk, resolved);
    r.results.insert("configurations".into(), (rows.len() as i64).into());
    r.files.push(write_table(
        dir,
        "fk.csv",
        &["slider positions (mm) and resulting platform position (mm, base frame)"],
        &["q1_mm", "q2_mm", "q3_mm", "x_mm", "y_mm", "z_mm"],
        &rows,
    )?);
    Ok(r)
}

fn run_gci(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let (params, resolved) = single_design(cfg, Command::Gci)?;
    let spec = cfg.workspace.to_spec();
    let value = gci(&params, &spec)?;
    let origin = params.home_pose();
    let mut rows = Vec::new();
    for offset in sample_workspace(&spec)? {
        let pose = origin.translated(&offset);
        let inv_k = 1.0 / condition_number(&jacobian(&params, &pose)?);
        let p = pose.position;
        rows.push([p.x, p.y, p.z, inv_k].map(|v| v.to_string()).to_vec());
    }
    let mut r = report(Command::Gci, resolved);
    r.results.insert("gci".into(), value.into());
    r.results.insert("samples".into(), (rows.len() as i64).into());
    r.files.push(write_table(
        dir,
        "gci_samples.csv",
        &["workspace sample position (mm) and inverse Jacobian condition number"],
        &["x_mm", "y_mm", "z_mm", "inv_condition"],
        &rows,
    )?);
    Ok(r)
}

fn run_deflect(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let (params, resolved) = single_design(cfg, Command::Deflect)?;
    let law = resolve_law(cfg)?;
    let pose = poses(cfg, &params)[0];
    let wrench = Wrench {
        force: Vector3::from(cfg.inputs.force_n),
        torque: Vector3::from(cfg.inputs.torque_nm).map(nm_to_nmm),
    };
    let model = DeflectionModel::new(&params, &pose)?;
    let result = model.deflect(&wrench, &law)?;
    let forces = result.link_forces.map(|f| f.0).unwrap_or_default();
    let rows: Vec<Vec<String>> = (0..6)
        .map(|i| vec![i.to_string(), forces[i].to_string(), result.link_deflections_um[i].to_string()])
        .collect();
    let mut r = report(Command::Deflect, resolved);
    r.results.insert("pose_mm".into(), vec3(&pose.position));
    r.results.insert("linear_um".into(), vec3(&result.linear_um));
    r.results.insert("angular_deg".into(), vec3(&result.angular_deg));
    r.results.insert("gamma_condition".into(), model.condition.into());
    r.files.push(write_table(
        dir,
        "deflect.csv",
        &["axial link force (N, tension positive) and link deflection (um)"],
        &["link", "force_N", "deflection_um"],
        &rows,
    )?);
    Ok(r)
}

fn run_reduce(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let (params, resolved) = single_design(cfg, Command::Reduce)?;
    let log = require(&cfg.inputs.torsion_log, "torsion_log", Command::Reduce)?;
    let exp = TorsionExperiment {
        samples: read_torsion_log(open(log)?)?,
        geometry: params,
        spring_preload: cfg.inputs.spring_preload,
    };
    let pairs = reduce_torsion_experiment(&exp)?;
    let (mut w, path) = create(dir, "pairs.csv")?;
    write_pairs(&pairs, &mut w)?;
    finish(w, &path)?;
    let mut r = report(Command::Reduce, resolved);
    r.results.insert("samples".into(), (exp.samples.len() as i64).into());
    r.results.insert("pairs".into(), (pairs.len() as i64).into());
    r.results.insert("secant_compliance_deg_per_Nm".into(), exp.secant_compliance().into());
    r.files.push(path);
    Ok(r)
}

fn fit_table(fit: &FitReport) -> Table {
    let mut t = Table::new();
    if let ComplianceLaw::Power { a, b } = fit.law {
        t.insert("a".into(), a.into());
        t.insert("b".into(), b.into());
    }
    t.insert("r_squared".into(), fit.r_squared.into());
    t.insert("rms_um".into(), fit.rms_um.into());
    t.insert("pairs".into(), (fit.n_pairs as i64).into());
    t.insert("iterations".into(), (fit.iterations as i64).into());
    t
}

fn run_fit(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let path = match (&cfg.inputs.pairs, &cfg.law) {
        (Some(p), _) => p,
        (None, LawConfig::Fit { pairs }) => pairs,
        (None, _) => require(&None, "pairs", Command::Fit)?,
    };
    let pairs = read_pairs(open(path)?)?;
    let fit = fit_compliance_law(&pairs)?;
    let mut r = report(Command::Fit, cfg.clone());
    r.results.insert("fit".into(), fit_table(&fit).into());
    r.files.extend(emit_plot_data(&PlotData::Fit { pairs: &pairs, fit: &fit }, PlotKind::Fit, dir, &mut r.warnings)?);
    Ok(r)
}

fn run_sweep_command(cfg: &RunConfig, dir: &Path, threads: Option<usize>) -> Result<Report, CliError> {
    let mut resolved = cfg.clone();
    let grid_cfg = cfg.grid_or_default();
    resolved.design = None;
    resolved.grid = Some(grid_cfg.clone());
    let law = resolve_law(cfg)?;
    let sweep = run_sweep(&grid_cfg.to_grid(), &cfg.settings(law), &cfg.weights(), threads)?;

    let (mut w, path) = create(dir, "sweep.csv")?;
    write_sweep_csv(&sweep.rows(), &mut w)?;
    finish(w, &path)?;
    let rows = sweep.rows();
    let front: Vec<_> = sweep.pareto.iter().map(|&i| rows[i].clone()).collect();
    let (mut w, front_path) = create(dir, "pareto.csv")?;
    write_sweep_csv(&front, &mut w)?;
    finish(w, &front_path)?;

    let mut r = report(Command::Sweep, resolved);
    r.files.push(path);
    r.files.push(front_path);
    r.results.insert("designs".into(), (sweep.designs.len() as i64).into());
    r.results.insert("feasible".into(), (sweep.feasible_count() as i64).into());
    r.results.insert("law".into(), Table::try_from(law).expect("law serializes").into());
    let design_table = |i: usize| {
        let d = &sweep.designs[i];
        let s = &sweep.scores[i];
        let mut t = Table::new();
        t.insert("L".into(), d.link_length.into());
        t.insert("w".into(), d.leg_width.into());
        t.insert("psi".into(), d.offset_angle_deg().into());
        t.insert("gci".into(), s.gci.unwrap_or(f64::NAN).into());
        t.insert("tc_avg".into(), s.avg_torsional_compliance.unwrap_or(f64::NAN).into());
        Value::Table(t)
    };
    r.results.insert(
        "pareto".into(),
        Value::Array(sweep.pareto.iter().map(|&i| design_table(i)).collect()),
    );
    match sweep.selected {
        Some(i) => {
            r.results.insert("selected".into(), design_table(i));
        }
        None => r.warnings.push("no feasible design: Pareto front and selection are empty".into()),
    }
    r.files.extend(emit_plot_data(&PlotData::Sweep(&sweep), PlotKind::Sweep, dir, &mut r.warnings)?);
    Ok(r)
}

fn run_bench_accuracy(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let path = require(&cfg.inputs.grid_log, "grid_log", Command::BenchAccuracy)?;
    let log = read_grid_log(open(path)?)?;
    let acc = grid_accuracy_with(&log, cfg.inputs.nominal_step_mm, cfg.inputs.std_convention)?;
    let axes = ["x", "y", "z"];
    let mut rows = Vec::new();
    for (m, motion) in axes.iter().enumerate() {
        for (k, measured) in axes.iter().enumerate() {
            let cell = acc.cell(m, k);
            rows.push(vec![
                motion.to_string(),
                measured.to_string(),
                opt(cell.map(|c| c.mean)),
                opt(cell.map(|c| c.std)),
                cell.map_or(0, |c| c.n).to_string(),
            ]);
        }
    }
    let mut r = report(Command::BenchAccuracy, cfg.clone());
    r.results.insert("nominal_step_mm".into(), acc.nominal_step_mm.into());
    r.results.insert("records".into(), (log.records.len() as i64).into());
    r.files.push(write_table(
        dir,
        "accuracy.csv",
        &[
            "relative positioning error (um) per motion axis and measured axis",
            "empty mean/std: axis not observed by any camera plane",
        ],
        &["motion_axis", "measured_axis", "mean_um", "std_um", "pairs"],
        &rows,
    )?);
    Ok(r)
}

fn run_bench_repeat(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let path = require(&cfg.inputs.grid_log, "grid_log", Command::BenchRepeat)?;
    let log = read_grid_log(open(path)?)?;
    let rep = repeatability_with(&log, cfg.inputs.std_convention)?;
    let rows: Vec<Vec<String>> = ["x", "y", "z"]
        .iter()
        .enumerate()
        .map(|(k, axis)| {
            vec![
                axis.to_string(),
                opt(rep.per_axis_um[k]),
                rep.targets_per_axis[k].to_string(),
                opt(rep.resolution_um[k]),
            ]
        })
        .collect();
    let mut r = report(Command::BenchRepeat, cfg.clone());
    r.warnings.extend(rep.warnings.iter().cloned());
    r.results.insert("records".into(), (log.records.len() as i64).into());
    r.files.push(write_table(
        dir,
        "repeatability.csv",
        &["per-target standard deviation averaged over targets (um); resolution in um"],
        &["axis", "repeatability_um", "targets", "resolution_um"],
        &rows,
    )?);
    Ok(r)
}

fn run_bench_compliance(cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let path = require(&cfg.inputs.trace, "trace", Command::BenchCompliance)?;
    let mut log = read_trace(open(path)?)?;
    log.position_mm = cfg.inputs.trace_position_mm;
    let c = compliance_from_trace(&log)?;
    let mut rows = vec![vec!["x".to_string(), c[0].to_string()]];
    rows.push(vec!["y".into(), c[1].to_string()]);
    rows.push(vec!["z".into(), c[2].to_string()]);
    let mut r = report(Command::BenchCompliance, cfg.clone());
    r.results.insert("samples".into(), (log.samples.len() as i64).into());
    if let Some(p) = log.position_mm {
        r.results.insert("position_mm".into(), Value::Array(vec![p[0].into(), p[1].into()]));
    }
    r.files.push(write_table(
        dir,
        "compliance.csv",
        &["least-squares displacement/force slope magnitude per axis (um/N)"],
        &["axis", "compliance_um_per_N"],
        &rows,
    )?);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Sweep,
    Fit,
}

pub enum PlotData<'a> {
    Sweep(&'a SweepResult),
    Fit { pairs: &'a [ForcePair], fit: &'a FitReport },
}

pub const CURVE_POINTS: usize = 100;

/// Plot-ready CSV files. Sweep: one `(ψ, L, gci, tc_avg)` slice per leg width,
/// feasible designs only, rows ordered by ψ then L. Fit: the pooled scatter and
/// the fitted curve over the force range of the data.
pub fn emit_plot_data(
    data: &PlotData,
    kind: PlotKind,
    dir: &Path,
    warnings: &mut Vec<String>,
) -> Result<Vec<PathBuf>, CliError> {
    match (data, kind) {
        (PlotData::Sweep(sweep), PlotKind::Sweep) => {
            let mut files = Vec::new();
            if sweep.feasible_count() == 0 {
                warnings.push("no feasible design: slice files contain headers only".into());
            }
            for w in sweep.grid.leg_width.values() {
                let mut rows: Vec<(f64, f64, f64, f64)> = sweep
                    .designs
                    .iter()
                    .zip(&sweep.scores)
                    .filter(|(d, _)| d.leg_width == w)
                    .filter_map(|(d, s)| {
                        Some((d.offset_angle_deg(), d.link_length, s.gci?, s.avg_torsional_compliance?))
                    })
                    .collect();
                rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                let rows: Vec<Vec<String>> = rows
                    .iter()
                    .map(|&(psi, l, g, t)| [psi, l, g, t].map(|v| v.to_string()).to_vec())
                    .collect();
                let comment = format!(
                    "leg width w = {w} mm; psi (deg), L (mm), gci, tc_avg (deg/(N m)); feasible designs"
                );
                files.push(write_table(
                    dir,
                    &format!("slice_w{w}.csv"),
                    &[&comment],
                    &["psi", "L", "gci", "tc_avg"],
                    &rows,
                )?);
            }
            Ok(files)
        }
        (PlotData::Fit { pairs, fit }, PlotKind::Fit) => {
            let scatter: Vec<Vec<String>> = pairs
                .iter()
                .map(|p| {
                    vec![
                        p.link.to_string(),
                        p.force_n.abs().to_string(),
                        (p.deflection_um * p.force_n.signum()).to_string(),
                    ]
                })
                .collect();
            let (lo, hi) = pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.force_n.abs()), hi.max(p.force_n.abs()))
            });
            let curve: Vec<Vec<String>> = sample_curve(&fit.law, lo, hi, CURVE_POINTS)
                .iter()
                .map(|&(f, d)| vec![f.to_string(), d.to_string()])
                .collect();
            Ok(vec![
                write_table(
                    dir,
                    "fit_scatter.csv",
                    &["link, |force| (N), deflection along the force sign (um)"],
                    &["link", "force_N", "deflection_um"],
                    &scatter,
                )?,
                write_table(
                    dir,
                    "fit_curve.csv",
                    &["fitted law sampled over the force range of the data; force (N), deflection (um)"],
                    &["force_N", "deflection_um"],
                    &curve,
                )?,
            ])
        }
        _ => Err(CliError::Usage(format!("plot kind {kind:?} does not match the result"))),
    }
}
