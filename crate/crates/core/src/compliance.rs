//! Link-level deflection model of the delta stage.
//!
//! An external wrench at the platform center P is carried by the six links
//! as pure axial forces. With `Γ = [γ_1 … γ_6]`, `γ_i = [r_CiDi ; r_PDi × r_CiDi]`:
//!
//! * wrench from link forces: `w = Γ·F_c / L`
//! * link forces from wrench: `F_c = L·Γ⁻¹·w`
//! * link stretch from platform motion: `δL = Γᵀ·x / L`
//! * platform motion from link stretch: `x = L·Γ⁻ᵀ·δL`
//!
//! Units: geometry in mm, forces in N, torques in N·mm, link deflections and
//! platform translation in µm. The rotational part of `x` is then in µm/mm
//! (mrad) and is converted to degrees in [`DeflectionResult`].

use nalgebra::{Matrix6, Vector3, Vector6, LU};
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::kinematics::{solve_legs, DeltaParams, PlatformPose};
use crate::units::{deg_to_mrad, mrad_to_deg, nm_to_nmm};

/// Default upper bound on `cond(Γ)` before a pose is treated as singular.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e8;

/// Endpoints of the six links. Links `2i` and `2i+1` form the parallelogram of leg `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Slider-side joint centers.
    pub c: [Vector3<f64>; 6],
    /// Platform-side joint centers.
    pub d: [Vector3<f64>; 6],
    pub link_length: f64,
}

impl LinkGeometry {
    pub fn axis(&self, link: usize) -> Vector3<f64> {
        self.d[link] - self.c[link]
    }
}

/// Place the two links of every leg at ±w/2 along the rail's tangential direction.
pub fn link_endpoints(params: &DeltaParams, pose: &PlatformPose) -> Result<LinkGeometry> {
    let legs = solve_legs(params, pose)?;
    let half = 0.5 * params.leg_width;
    let mut c = [Vector3::zeros(); 6];
    let mut d = [Vector3::zeros(); 6];
    for (i, leg) in legs.iter().enumerate() {
        let t = params.tangential(i) * half;
        c[2 * i] = leg.slider + t;
        d[2 * i] = leg.platform_joint + t;
        c[2 * i + 1] = leg.slider - t;
        d[2 * i + 1] = leg.platform_joint - t;
    }
    Ok(LinkGeometry {
        c,
        d,
        link_length: params.link_length,
    })
}

/// Column `i` is `[r_CiDi ; (D_i − P) × r_CiDi]`.
pub fn gamma_matrix(geom: &LinkGeometry, pose: &PlatformPose) -> Matrix6<f64> {
    let mut g = Matrix6::zeros();
    for i in 0..6 {
        let r = geom.axis(i);
        let arm = geom.d[i] - pose.position;
        let m = arm.cross(&r);
        g.set_column(i, &Vector6::new(r.x, r.y, r.z, m.x, m.y, m.z));
    }
    g
}

/// Force (N) and torque (N·mm) applied at P.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self {
            force: Vector3::zeros(),
            torque: Vector3::zeros(),
        }
    }

    pub fn torsion(tau_z_nmm: f64) -> Self {
        Self {
            force: Vector3::zeros(),
            torque: Vector3::new(0.0, 0.0, tau_z_nmm),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: Vector3::new(v[0], v[1], v[2]),
            torque: Vector3::new(v[3], v[4], v[5]),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.to_vector().iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(ModelError::domain("wrench", "components must be finite"))
        }
    }
}

/// Axial link forces (N), tension positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkForces(pub Vector6<f64>);

/// Axial compliance of a link (joints included). Deflections in µm, forces in N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComplianceLaw {
    /// `δL = sign(F)·a·|F|^b`
    Power { a: f64, b: f64 },
    /// `δL = c·F`
    Linear { c: f64 },
}

impl ComplianceLaw {
    /// Power law identified from the torsion experiments.
    pub const IDENTIFIED: ComplianceLaw = ComplianceLaw::Power { a: 3.7, b: 0.71 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            ComplianceLaw::Power { a, b } => {
                if !(a.is_finite() && a > 0.0) {
                    return Err(ModelError::domain("compliance a", format!("must be > 0, got {a}")));
                }
                if !(b.is_finite() && b > 0.0 && b <= 1.5) {
                    return Err(ModelError::domain(
                        "compliance b",
                        format!("must lie in (0, 1.5], got {b}"),
                    ));
                }
            }
            ComplianceLaw::Linear { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(ModelError::domain("compliance c", format!("must be > 0, got {c}")));
                }
            }
        }
        Ok(())
    }

    /// Link deflection (µm) for an axial force (N). Odd in `force`.
    pub fn deflection(&self, force: f64) -> f64 {
        match *self {
            ComplianceLaw::Power { a, b } => force.signum() * a * force.abs().powf(b),
            ComplianceLaw::Linear { c } => c * force,
        }
    }

    /// Scale the compliance coefficient by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        match *self {
            ComplianceLaw::Power { a, b } => ComplianceLaw::Power { a: a * k, b },
            ComplianceLaw::Linear { c } => ComplianceLaw::Linear { c: c * k },
        }
    }
}

impl Default for ComplianceLaw {
    fn default() -> Self {
        Self::IDENTIFIED
    }
}

/// Platform deflection caused by a load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionResult {
    /// Translation of P (µm).
    pub linear_um: Vector3<f64>,
    /// Rotation of the platform (deg).
    pub angular_deg: Vector3<f64>,
    pub link_deflections_um: Vector6<f64>,
    pub link_forces: Option<LinkForces>,
}

impl DeflectionResult {
    fn from_raw(raw: &Vector6<f64>, dl: Vector6<f64>, forces: Option<LinkForces>) -> Self {
        Self {
            linear_um: Vector3::new(raw[0], raw[1], raw[2]),
            angular_deg: Vector3::new(raw[3], raw[4], raw[5]).map(mrad_to_deg),
            link_deflections_um: dl,
            link_forces: forces,
        }
    }
}

/// Factored Γ at one pose, reused for every load case evaluated there.
#[derive(Debug, Clone)]
pub struct DeflectionModel {
    pub geometry: LinkGeometry,
    pub gamma: Matrix6<f64>,
    pub condition: f64,
    lu: LU<f64, nalgebra::U6, nalgebra::U6>,
    lu_t: LU<f64, nalgebra::U6, nalgebra::U6>,
}

impl DeflectionModel {
    pub fn new(params: &DeltaParams, pose: &PlatformPose) -> Result<Self> {
        Self::with_condition_limit(params, pose, DEFAULT_CONDITION_LIMIT)
    }

    pub fn with_condition_limit(
        params: &DeltaParams,
        pose: &PlatformPose,
        condition_limit: f64,
    ) -> Result<Self> {
        let geometry = link_endpoints(params, pose)?;
        Self::from_geometry(geometry, pose, condition_limit)
    }

    pub fn from_geometry(
        geometry: LinkGeometry,
        pose: &PlatformPose,
        condition_limit: f64,
    ) -> Result<Self> {
        let gamma = gamma_matrix(&geometry, pose);
        let sv = gamma.singular_values();
        let condition = if sv.min() > 0.0 {
            sv.max() / sv.min()
        } else {
            f64::INFINITY
        };
        if !(condition <= condition_limit) {
            return Err(ModelError::Singular {
                what: "link matrix Γ is ill-conditioned".into(),
                condition,
            });
        }
        Ok(Self {
            geometry,
            gamma,
            condition,
            lu: gamma.lu(),
            lu_t: gamma.transpose().lu(),
        })
    }

    fn singular(&self) -> ModelError {
        ModelError::Singular {
            what: "link matrix Γ could not be factored".into(),
            condition: self.condition,
        }
    }

    pub fn link_forces(&self, wrench: &Wrench) -> Result<LinkForces> {
        wrench.validate()?;
        let f = self
            .lu
            .solve(&wrench.to_vector())
            .ok_or_else(|| self.singular())?;
        Ok(LinkForces(f * self.geometry.link_length))
    }

    /// Wrench at P carried by the given link forces.
    pub fn wrench_from_forces(&self, forces: &LinkForces) -> Wrench {
        Wrench::from_vector(&(self.gamma * forces.0 / self.geometry.link_length))
    }

    /// Raw platform motion `[δX (µm); δθ (mrad)]` from link deflections.
    pub fn raw_platform_motion(&self, dl: &Vector6<f64>) -> Result<Vector6<f64>> {
        let x = self.lu_t.solve(dl).ok_or_else(|| self.singular())?;
        Ok(x * self.geometry.link_length)
    }

    /// Link deflections produced by a raw platform motion `[δX (µm); δθ (mrad)]`.
    pub fn link_deflections_from_motion(&self, raw: &Vector6<f64>) -> Vector6<f64> {
        self.gamma.transpose() * raw / self.geometry.link_length
    }

    pub fn platform_deflection(&self, dl: &Vector6<f64>) -> Result<DeflectionResult> {
        let raw = self.raw_platform_motion(dl)?;
        Ok(DeflectionResult::from_raw(&raw, *dl, None))
    }

    /// Full pipeline: wrench → link forces → link deflections → platform deflection.
    pub fn deflect(&self, wrench: &Wrench, law: &ComplianceLaw) -> Result<DeflectionResult> {
        let forces = self.link_forces(wrench)?;
        let dl = link_deflections(&forces, law);
        let raw = self.raw_platform_motion(&dl)?;
        Ok(DeflectionResult::from_raw(&raw, dl, Some(forces)))
    }
}

/// Axial link forces balancing `wrench` at P.
pub fn solve_link_forces(
    geom: &LinkGeometry,
    pose: &PlatformPose,
    wrench: &Wrench,
) -> Result<LinkForces> {
    DeflectionModel::from_geometry(*geom, pose, DEFAULT_CONDITION_LIMIT)?.link_forces(wrench)
}

/// Apply the compliance law link by link (µm).
pub fn link_deflections(forces: &LinkForces, law: &ComplianceLaw) -> Vector6<f64> {
    forces.0.map(|f| law.deflection(f))
}

/// Platform deflection produced by the given link deflections (µm).
pub fn platform_deflection(
    geom: &LinkGeometry,
    pose: &PlatformPose,
    dl: &Vector6<f64>,
) -> Result<DeflectionResult> {
    DeflectionModel::from_geometry(*geom, pose, DEFAULT_CONDITION_LIMIT)?.platform_deflection(dl)
}

/// Platform twist about z per unit torsion, deg/(N·m), for a reference torque in N·m.
pub fn torsional_compliance(
    params: &DeltaParams,
    pose: &PlatformPose,
    law: &ComplianceLaw,
    tau_ref_nm: f64,
) -> Result<f64> {
    let model = DeflectionModel::new(params, pose)?;
    torsional_compliance_with(&model, law, tau_ref_nm)
}

pub(crate) fn torsional_compliance_with(
    model: &DeflectionModel,
    law: &ComplianceLaw,
    tau_ref_nm: f64,
) -> Result<f64> {
    if !tau_ref_nm.is_finite() || tau_ref_nm == 0.0 {
        return Err(ModelError::domain(
            "tau_z_ref",
            format!("must be finite and non-zero, got {tau_ref_nm}"),
        ));
    }
    let result = model.deflect(&Wrench::torsion(nm_to_nmm(tau_ref_nm)), law)?;
    Ok(result.angular_deg.z / tau_ref_nm)
}

/// One reading of a torsion test: applied torque and measured twist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsionSample {
    pub tau_z_nmm: f64,
    pub dtheta_z_deg: f64,
}

/// A torsion test on one delta configuration, loaded at the centered pose.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsionExperiment {
    pub samples: Vec<TorsionSample>,
    pub geometry: DeltaParams,
    pub spring_preload: bool,
}

pub const MIN_TORSION_SAMPLES: usize = 10;

impl TorsionExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < MIN_TORSION_SAMPLES {
            return Err(ModelError::domain(
                "torsion experiment",
                format!(
                    "needs at least {MIN_TORSION_SAMPLES} samples, got {}",
                    self.samples.len()
                ),
            ));
        }
        if !self
            .samples
            .iter()
            .all(|s| s.tau_z_nmm.is_finite() && s.dtheta_z_deg.is_finite())
        {
            return Err(ModelError::domain("torsion experiment", "non-finite sample"));
        }
        let both_signs = self.samples.iter().any(|s| s.tau_z_nmm > 0.0)
            && self.samples.iter().any(|s| s.tau_z_nmm < 0.0);
        if !both_signs && !has_reversal(&self.samples) {
            return Err(ModelError::domain(
                "torsion experiment",
                "torque must span both signs or contain a loading/unloading cycle",
            ));
        }
        Ok(())
    }

    /// Secant compliance over the whole cycle, deg/(N·m): Σ|δθ| / Σ|τ|.
    pub fn secant_compliance(&self) -> f64 {
        let (num, den) = self.samples.iter().fold((0.0, 0.0), |(n, d), s| {
            (n + s.dtheta_z_deg.abs(), d + s.tau_z_nmm.abs())
        });
        if den == 0.0 {
            0.0
        } else {
            num / (den / 1000.0)
        }
    }
}

fn has_reversal(samples: &[TorsionSample]) -> bool {
    let mut last_dir = 0.0;
    for w in samples.windows(2) {
        let d = (w[1].tau_z_nmm - w[0].tau_z_nmm).signum();
        if d != 0.0 {
            if last_dir != 0.0 && d != last_dir {
                return true;
            }
            last_dir = d;
        }
    }
    false
}

/// A (link force, link deflection) pair recovered from a torsion test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcePair {
    pub link: usize,
    pub force_n: f64,
    pub deflection_um: f64,
}

/// Turn measured (τ_z, δθ_z) samples into per-link (F_c, δL) pairs.
///
/// Forces come from `F_c = L·Γ⁻¹·[0; 0, 0, τ_z]`, deflections from
/// `δL = Γᵀ·[0; 0, 0, δθ_z] / L`. Six pairs are emitted per sample.
pub fn reduce_torsion_experiment(exp: &TorsionExperiment) -> Result<Vec<ForcePair>> {
    exp.validate()?;
    let pose = exp.geometry.home_pose();
    let model = DeflectionModel::new(&exp.geometry, &pose)?;
    let mut out = Vec::with_capacity(exp.samples.len() * 6);
    for s in &exp.samples {
        let forces = model.link_forces(&Wrench::torsion(s.tau_z_nmm))?;
        let raw = Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, deg_to_mrad(s.dtheta_z_deg));
        let dl = model.link_deflections_from_motion(&raw);
        for link in 0..6 {
            out.push(ForcePair {
                link,
                force_n: forces.0[link],
                deflection_um: dl[link],
            });
        }
    }
    Ok(out)
}

/// Predicted twist (deg) at the centered pose for each applied torque (N·mm).
pub fn simulate_torsion(
    params: &DeltaParams,
    law: &ComplianceLaw,
    torques_nmm: &[f64],
) -> Result<Vec<f64>> {
    law.validate()?;
    let model = DeflectionModel::new(params, &params.home_pose())?;
    torques_nmm
        .iter()
        .map(|&t| Ok(model.deflect(&Wrench::torsion(t), law)?.angular_deg.z))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn after_opt() -> DeltaParams {
        DeltaParams::derive(64.0, 40.0, 27.0, 12.4).unwrap()
    }

    #[test]
    fn centered_links_have_length_l_and_angle_psi() {
        let p = after_opt();
        let g = link_endpoints(&p, &p.home_pose()).unwrap();
        for i in 0..6 {
            let r = g.axis(i);
            assert_relative_eq!(r.norm(), 64.0, epsilon = 1e-9);
            assert_relative_eq!(r.z / r.norm(), 27f64.to_radians().cos(), epsilon = 1e-12);
        }
        for leg in 0..3 {
            let a = g.axis(2 * leg);
            let b = g.axis(2 * leg + 1);
            assert!(a.cross(&b).norm() < 1e-12 * a.norm() * b.norm());
            assert_relative_eq!((g.c[2 * leg] - g.c[2 * leg + 1]).norm(), 40.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_upper_block_symmetry() {
        let p = after_opt();
        let pose = p.home_pose();
        let g = link_endpoints(&p, &pose).unwrap();
        let gm = gamma_matrix(&g, &pose);
        let sum: Vector6<f64> = (0..6).map(|i| gm.column(i).into_owned()).sum();
        assert_relative_eq!(sum[2] / 64.0, 6.0 * 27f64.to_radians().cos(), epsilon = 1e-12);
        assert!(sum[0].abs() < 1e-9 && sum[1].abs() < 1e-9);
    }

    #[test]
    fn vertical_force_splits_evenly() {
        let p = after_opt();
        let pose = p.home_pose();
        let g = link_endpoints(&p, &pose).unwrap();
        let fz = 12.0;
        let w = Wrench {
            force: Vector3::new(0.0, 0.0, fz),
            torque: Vector3::zeros(),
        };
        let f = solve_link_forces(&g, &pose, &w).unwrap();
        for v in f.0.iter() {
            assert_relative_eq!(*v, fz / (6.0 * 27f64.to_radians().cos()), epsilon = 1e-10);
        }
        let zero = solve_link_forces(&g, &pose, &Wrench::zero()).unwrap();
        assert_eq!(zero.0, Vector6::zeros());
    }

    #[test]
    fn torsion_forces_alternate() {
        let p = after_opt();
        let pose = p.home_pose();
        let model = DeflectionModel::new(&p, &pose).unwrap();
        let f = model.link_forces(&Wrench::torsion(1000.0)).unwrap().0;
        let m = f[0].abs();
        for i in 0..6 {
            assert_relative_eq!(f[i].abs(), m, epsilon = 1e-9 * m);
            assert!(f[i] * f[(i + 1) % 6] < 0.0);
        }
        let back = model.wrench_from_forces(&LinkForces(f));
        assert_relative_eq!(back.to_vector(), Wrench::torsion(1000.0).to_vector(), epsilon = 1e-9);
        // independent dense solve
        let dense = p.link_length * model.gamma.try_inverse().unwrap() * Wrench::torsion(1000.0).to_vector();
        assert_relative_eq!(dense, f, epsilon = 1e-9 * m);
    }

    #[test]
    fn identified_law_values() {
        let law = ComplianceLaw::IDENTIFIED;
        assert_relative_eq!(law.deflection(1.0), 3.7, epsilon = 1e-15);
        assert_eq!(law.deflection(0.0), 0.0);
        assert_relative_eq!(law.deflection(-1.0), -3.7, epsilon = 1e-15);
        assert!(ComplianceLaw::Power { a: 3.7, b: 1.6 }.validate().is_err());
        assert!(ComplianceLaw::Power { a: 0.0, b: 0.7 }.validate().is_err());
        assert!(ComplianceLaw::Linear { c: -1.0 }.validate().is_err());
    }

    #[test]
    fn zero_and_vertical_deflection() {
        let p = after_opt();
        let pose = p.home_pose();
        let model = DeflectionModel::new(&p, &pose).unwrap();
        let z = model.platform_deflection(&Vector6::zeros()).unwrap();
        assert_eq!(z.linear_um, Vector3::zeros());
        assert_eq!(z.angular_deg, Vector3::zeros());

        let w = Wrench {
            force: Vector3::new(0.0, 0.0, 5.0),
            torque: Vector3::zeros(),
        };
        let r = model.deflect(&w, &ComplianceLaw::IDENTIFIED).unwrap();
        assert!(r.linear_um.z > 0.0);
        assert!(r.linear_um.x.abs() < 1e-9 && r.linear_um.y.abs() < 1e-9);
        assert!(r.angular_deg.norm() < 1e-12);
    }

    #[test]
    fn torsional_compliance_rejects_zero_torque() {
        let p = after_opt();
        let e = torsional_compliance(&p, &p.home_pose(), &ComplianceLaw::IDENTIFIED, 0.0);
        assert!(matches!(e, Err(ModelError::Domain { .. })));
    }

    #[test]
    fn linear_law_compliance_independent_of_torque() {
        let p = after_opt();
        let law = ComplianceLaw::Linear { c: 2.0 };
        let a = torsional_compliance(&p, &p.home_pose(), &law, 0.3).unwrap();
        let b = torsional_compliance(&p, &p.home_pose(), &law, 2.7).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12 * a.abs());
    }

    #[test]
    fn torsion_experiment_validation() {
        let geometry = after_opt();
        let few = TorsionExperiment {
            samples: vec![TorsionSample { tau_z_nmm: 1.0, dtheta_z_deg: 0.0 }; 5],
            geometry,
            spring_preload: false,
        };
        assert!(few.validate().is_err());
        let monotone = TorsionExperiment {
            samples: (0..12)
                .map(|i| TorsionSample { tau_z_nmm: i as f64, dtheta_z_deg: 0.0 })
                .collect(),
            geometry,
            spring_preload: false,
        };
        assert!(monotone.validate().is_err());
        let cycled = TorsionExperiment {
            samples: (0..12)
                .map(|i| TorsionSample {
                    tau_z_nmm: (6 - (i - 6i32).abs()) as f64,
                    dtheta_z_deg: 0.0,
                })
                .collect(),
            geometry,
            spring_preload: false,
        };
        assert!(cycled.validate().is_ok());
    }

    #[test]
    fn reduce_zero_and_sign_flip() {
        let geometry = after_opt();
        let taus: Vec<f64> = (0..12).map(|i| (i as f64 - 5.0) * 200.0).collect();
        let thetas = simulate_torsion(&geometry, &ComplianceLaw::IDENTIFIED, &taus).unwrap();
        let samples: Vec<_> = taus
            .iter()
            .zip(&thetas)
            .map(|(&t, &d)| TorsionSample { tau_z_nmm: t, dtheta_z_deg: d })
            .collect();
        let exp = TorsionExperiment { samples, geometry, spring_preload: false };
        let pairs = reduce_torsion_experiment(&exp).unwrap();
        assert_eq!(pairs.len(), 72);
        // τ = 0 at index 5
        for p in &pairs[30..36] {
            assert_eq!(p.force_n, 0.0);
            assert_eq!(p.deflection_um, 0.0);
        }
        // τ = ±1000 at indices 0 and 10
        for link in 0..6 {
            let neg = pairs[link];
            let pos = pairs[60 + link];
            assert_relative_eq!(neg.force_n, -pos.force_n, epsilon = 1e-9);
            assert_relative_eq!(neg.deflection_um, -pos.deflection_um, epsilon = 1e-9);
        }
    }
}
