//! Linear-rail delta geometry, inverse/forward kinematics and the full arm chain.
//!
//! Frame conventions: rails are vertical (+Z of the base frame) at radius
//! `base_radius`, one per leg, at the azimuths in `rail_azimuths`. Leg `i`
//! has a slider at `s_i = r_b·u_i + q_i·z` and a platform joint at
//! `d_i = P + r_p·u_i`, where `u_i` is the radial unit vector of the rail.
//! Only the leg midline is used here; the parallelogram width enters the
//! compliance model.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::units::deg_to_rad;
use crate::workspace::{sample_workspace, WorkspaceSpec};

/// Default rail azimuths in degrees.
pub const DEFAULT_RAIL_AZIMUTHS_DEG: [f64; 3] = [90.0, 210.0, 330.0];

/// |n·z| below this marks a link as horizontal.
const HORIZONTAL_LINK_TOL: f64 = 1e-6;

/// Delta stage design point. Angles are stored in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaParams {
    pub link_length: f64,
    pub leg_width: f64,
    pub offset_angle: f64,
    pub sr_joint_radius: f64,
    pub platform_radius: f64,
    pub base_radius: f64,
    pub rail_azimuths: [f64; 3],
}

/// Minimum platform radius that fits the six spherical joints.
pub fn platform_radius_for(leg_width: f64, sr_joint_radius: f64) -> f64 {
    let r = sr_joint_radius;
    let w = leg_width;
    (4.0 * r * r + 2.0 * w * r + w * w).sqrt() / 3f64.sqrt()
}

/// Inverse of [`platform_radius_for`]: the joint radius that makes a given
/// leg width need exactly `platform_radius`.
pub fn sr_radius_for(leg_width: f64, platform_radius: f64) -> Result<f64> {
    check_positive("leg_width", leg_width)?;
    check_positive("platform_radius", platform_radius)?;
    // 4r² + 2wr + (w² − 3r_p²) = 0, positive root
    let w = leg_width;
    let c = w * w - 3.0 * platform_radius * platform_radius;
    if c >= 0.0 {
        return Err(ModelError::domain(
            "platform_radius",
            format!(
                "{platform_radius} mm cannot hold a leg of width {w} mm (needs > {:.6} mm)",
                w / 3f64.sqrt()
            ),
        ));
    }
    let disc = 4.0 * w * w - 16.0 * c;
    Ok((-2.0 * w + disc.sqrt()) / 8.0)
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(ModelError::domain(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_offset_angle(psi: f64) -> Result<()> {
    if !psi.is_finite() || psi <= 0.0 || psi >= std::f64::consts::FRAC_PI_2 {
        return Err(ModelError::domain(
            "offset_angle",
            format!("must lie strictly between 0 and 90 deg, got {} deg", psi.to_degrees()),
        ));
    }
    Ok(())
}

/// Derive platform and base radii from the independent design parameters.
pub fn derive_radii(
    link_length: f64,
    leg_width: f64,
    offset_angle_deg: f64,
    sr_joint_radius: f64,
) -> Result<DeltaParams> {
    DeltaParams::derive(link_length, leg_width, offset_angle_deg, sr_joint_radius)
}

impl DeltaParams {
    pub fn derive(
        link_length: f64,
        leg_width: f64,
        offset_angle_deg: f64,
        sr_joint_radius: f64,
    ) -> Result<Self> {
        check_positive("link_length", link_length)?;
        check_positive("leg_width", leg_width)?;
        check_positive("sr_joint_radius", sr_joint_radius)?;
        let psi = deg_to_rad(offset_angle_deg);
        check_offset_angle(psi)?;
        let platform_radius = platform_radius_for(leg_width, sr_joint_radius);
        Ok(Self {
            link_length,
            leg_width,
            offset_angle: psi,
            sr_joint_radius,
            platform_radius,
            base_radius: platform_radius + link_length * psi.sin(),
            rail_azimuths: DEFAULT_RAIL_AZIMUTHS_DEG.map(deg_to_rad),
        })
    }

    /// Build a design from a measured platform radius (e.g. a test rig),
    /// backing out the joint radius so the radius relation still holds.
    pub fn from_platform_radius(
        link_length: f64,
        leg_width: f64,
        offset_angle_deg: f64,
        platform_radius: f64,
    ) -> Result<Self> {
        let r_sr = sr_radius_for(leg_width, platform_radius)?;
        Self::derive(link_length, leg_width, offset_angle_deg, r_sr)
    }

    pub fn with_rail_azimuths_deg(mut self, azimuths_deg: [f64; 3]) -> Result<Self> {
        let az = azimuths_deg.map(deg_to_rad);
        for (i, a) in az.iter().enumerate() {
            if !a.is_finite() {
                return Err(ModelError::domain("rail_azimuths", "must be finite"));
            }
            for b in &az[i + 1..] {
                let diff = (a - b).rem_euclid(std::f64::consts::TAU);
                if diff < 1e-9 || std::f64::consts::TAU - diff < 1e-9 {
                    return Err(ModelError::domain(
                        "rail_azimuths",
                        "must be pairwise distinct modulo 360 deg",
                    ));
                }
            }
        }
        self.rail_azimuths = az;
        Ok(self)
    }

    pub fn offset_angle_deg(&self) -> f64 {
        self.offset_angle.to_degrees()
    }

    /// Radial unit vector of rail `leg`.
    pub fn radial(&self, leg: usize) -> Vector3<f64> {
        let a = self.rail_azimuths[leg];
        Vector3::new(a.cos(), a.sin(), 0.0)
    }

    /// Tangential unit vector `z × u_i` of rail `leg`.
    pub fn tangential(&self, leg: usize) -> Vector3<f64> {
        let a = self.rail_azimuths[leg];
        Vector3::new(-a.sin(), a.cos(), 0.0)
    }

    /// `r_b − r_p`, horizontal leg gap at the centered pose.
    pub fn radial_gap(&self) -> f64 {
        self.base_radius - self.platform_radius
    }

    /// Centered pose at which every slider sits at `q = 0`.
    pub fn home_pose(&self) -> PlatformPose {
        PlatformPose::new(0.0, 0.0, self.link_length * self.offset_angle.cos())
    }
}

/// Position of the platform center P in the base frame (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformPose {
    pub position: Vector3<f64>,
}

impl PlatformPose {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: Vector3::new(x, y, z),
        }
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            position: self.position + offset,
        }
    }
}

/// Slider heights along the three rails (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPositions {
    pub q: [f64; 3],
}

impl JointPositions {
    pub fn new(q1: f64, q2: f64, q3: f64) -> Self {
        Self { q: [q1, q2, q3] }
    }
}

/// One solved leg midline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegState {
    pub slider: Vector3<f64>,
    pub platform_joint: Vector3<f64>,
    /// Unit vector from slider to platform joint.
    pub axis: Vector3<f64>,
}

/// Solve all three legs for a platform pose on the platform-above-slider branch.
pub fn solve_legs(params: &DeltaParams, pose: &PlatformPose) -> Result<[LegState; 3]> {
    let p = pose.position;
    if !p.iter().all(|c| c.is_finite()) {
        return Err(ModelError::domain("pose", "components must be finite"));
    }
    let l = params.link_length;
    let mut legs = [LegState {
        slider: Vector3::zeros(),
        platform_joint: Vector3::zeros(),
        axis: Vector3::z(),
    }; 3];
    for (i, leg) in legs.iter_mut().enumerate() {
        let u = params.radial(i);
        let d = p + params.platform_radius * u;
        let rail = params.base_radius * u;
        let gx = d.x - rail.x;
        let gy = d.y - rail.y;
        let gap2 = gx * gx + gy * gy;
        let disc = l * l - gap2;
        if disc < 0.0 {
            return Err(ModelError::Unreachable {
                leg: i,
                gap: gap2.sqrt(),
                link_length: l,
            });
        }
        let q = d.z - disc.sqrt();
        let slider = Vector3::new(rail.x, rail.y, q);
        *leg = LegState {
            slider,
            platform_joint: d,
            axis: (d - slider) / l,
        };
    }
    Ok(legs)
}

pub fn inverse_kinematics(params: &DeltaParams, pose: &PlatformPose) -> Result<JointPositions> {
    let legs = solve_legs(params, pose)?;
    Ok(JointPositions {
        q: [legs[0].slider.z, legs[1].slider.z, legs[2].slider.z],
    })
}

/// Intersect three spheres of equal radius. Returns both roots, higher z first.
pub fn trilaterate(centers: &[Vector3<f64>; 3], radius: f64) -> Result<[Vector3<f64>; 2]> {
    let [c1, c2, c3] = *centers;
    let d12 = c2 - c1;
    let d = d12.norm();
    let scale = d.max((c3 - c1).norm()).max(1.0);
    if d < 1e-12 * scale {
        return Err(ModelError::Singular {
            what: "two sphere centers coincide".into(),
            condition: f64::INFINITY,
        });
    }
    let ex = d12 / d;
    let d13 = c3 - c1;
    let i = ex.dot(&d13);
    let ey_raw = d13 - i * ex;
    let j = ey_raw.norm();
    if j < 1e-9 * scale {
        return Err(ModelError::Singular {
            what: "sphere centers are collinear".into(),
            condition: scale / j.max(f64::MIN_POSITIVE),
        });
    }
    let ey = ey_raw / j;
    let ez = ex.cross(&ey);
    // equal radii: r1² − r2² = 0
    let x = d / 2.0;
    let y = (i * i + j * j) / (2.0 * j) - i * x / j;
    let h2 = radius * radius - x * x - y * y;
    if h2 < 0.0 {
        return Err(ModelError::Unreachable {
            leg: 0,
            gap: (x * x + y * y).sqrt(),
            link_length: radius,
        });
    }
    let h = h2.sqrt();
    let base = c1 + x * ex + y * ey;
    let a = base + h * ez;
    let b = base - h * ez;
    Ok(if a.z >= b.z { [a, b] } else { [b, a] })
}

/// Forward kinematics on the branch with the platform above the sliders.
pub fn forward_kinematics(params: &DeltaParams, q: &JointPositions) -> Result<PlatformPose> {
    if !q.q.iter().all(|v| v.is_finite()) {
        return Err(ModelError::domain("joint positions", "must be finite"));
    }
    let gap = params.radial_gap();
    let centers: [Vector3<f64>; 3] =
        std::array::from_fn(|i| gap * params.radial(i) + Vector3::new(0.0, 0.0, q.q[i]));
    let roots = trilaterate(&centers, params.link_length)?;
    let above = |p: &Vector3<f64>| centers.iter().all(|c| p.z - c.z >= -1e-12);
    let chosen = roots.iter().find(|p| above(p)).unwrap_or(&roots[0]);
    Ok(PlatformPose { position: *chosen })
}

/// Inverse Jacobian: row `i` is `n_iᵀ / (n_i·z)` so that `q̇ = J·ṗ`.
pub fn jacobian(params: &DeltaParams, pose: &PlatformPose) -> Result<Matrix3<f64>> {
    let legs = solve_legs(params, pose)?;
    let mut j = Matrix3::zeros();
    for (i, leg) in legs.iter().enumerate() {
        let nz = leg.axis.z;
        if nz.abs() < HORIZONTAL_LINK_TOL {
            return Err(ModelError::Singular {
                what: format!("link of leg {i} is horizontal"),
                condition: 1.0 / nz.abs().max(f64::MIN_POSITIVE),
            });
        }
        j.set_row(i, &(leg.axis.transpose() / nz));
    }
    Ok(j)
}

/// 2-norm condition number `σ_max / σ_min`.
pub fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Angle (deg) between each leg's current axis and its axis at the home pose.
pub fn joint_swing_angles(params: &DeltaParams, pose: &PlatformPose) -> Result<[f64; 3]> {
    let legs = solve_legs(params, pose)?;
    let home = solve_legs(params, &params.home_pose())?;
    Ok(std::array::from_fn(|i| {
        let a = legs[i].axis;
        let b = home[i].axis;
        a.cross(&b).norm().atan2(a.dot(&b)).to_degrees()
    }))
}

/// Largest per-rail slider excursion over the sampled workspace (mm).
pub fn slider_travel(params: &DeltaParams, workspace: &WorkspaceSpec) -> Result<f64> {
    let poses = sample_workspace(workspace)?;
    let origin = params.home_pose();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for offset in &poses {
        let q = inverse_kinematics(params, &origin.translated(offset))?;
        for i in 0..3 {
            lo[i] = lo[i].min(q.q[i]);
            hi[i] = hi[i].max(q.q[i]);
        }
    }
    Ok((0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max))
}

/// Rigid transform with a proper rotation and a translation in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: t,
        }
    }

    pub fn trans_x(d: f64) -> Self {
        Self::translation(Vector3::new(d, 0.0, 0.0))
    }

    pub fn trans_z(d: f64) -> Self {
        Self::translation(Vector3::new(0.0, 0.0, d))
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::rotation_about(Vector3::x_axis(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::rotation_about(Vector3::y_axis(), angle)
    }

    fn rotation_about(axis: Unit<Vector3<f64>>, angle: f64) -> Self {
        Self {
            rotation: Rotation3::from_axis_angle(&axis, angle),
            translation: Vector3::zeros(),
        }
    }

    /// `self · other`
    pub fn then(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> nalgebra::Matrix4<f64> {
        let mut m = nalgebra::Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Roll/tilt arm mounted on the delta platform.
///
/// The tilt four-bar is reduced to a single revolute joint about Y followed
/// by a fixed tool offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub roll: f64,
    pub tilt: f64,
    pub tool_offset: Vector3<f64>,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            d1: 0.0,
            d2: 0.0,
            d3: 0.0,
            roll: 0.0,
            tilt: 0.0,
            tool_offset: Vector3::zeros(),
        }
    }
}

/// Joint ranges of the arm (rad).
pub const ROLL_LIMIT: f64 = 45.0 * std::f64::consts::PI / 180.0;
pub const TILT_LIMIT: f64 = 120.0 * std::f64::consts::PI / 180.0;

impl ArmConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d1", self.d1), ("d2", self.d2), ("d3", self.d3)] {
            if !v.is_finite() {
                return Err(ModelError::domain(name, "must be finite"));
            }
        }
        if !self.tool_offset.iter().all(|c| c.is_finite()) {
            return Err(ModelError::domain("tool_offset", "must be finite"));
        }
        for (name, v, lim) in [("roll", self.roll, ROLL_LIMIT), ("tilt", self.tilt, TILT_LIMIT)] {
            if !v.is_finite() || v.abs() > lim + 1e-12 {
                return Err(ModelError::OutOfRange {
                    name,
                    value: v.to_degrees(),
                    min: -lim.to_degrees(),
                    max: lim.to_degrees(),
                });
            }
        }
        Ok(())
    }

    /// Platform → tip transform without range checks.
    pub fn platform_to_tip(&self) -> RigidTransform {
        RigidTransform::trans_z(self.d1)
            .then(&RigidTransform::rot_x(self.roll))
            .then(&RigidTransform::trans_x(self.d2))
            .then(&RigidTransform::trans_z(self.d3))
            .then(&RigidTransform::rot_y(self.tilt))
            .then(&RigidTransform::translation(self.tool_offset))
    }
}

/// Base → tip transform of the whole robot.
pub fn full_chain_fk(
    params: &DeltaParams,
    q: &JointPositions,
    arm: &ArmConfig,
) -> Result<RigidTransform> {
    arm.validate()?;
    let p = forward_kinematics(params, q)?;
    Ok(RigidTransform::translation(p.position).then(&arm.platform_to_tip()))
}

/// Admittance law: commanded velocity (mm/s) proportional to handle force (N).
pub fn admittance_velocity(gain: &Matrix3<f64>, handle_force: &Vector3<f64>) -> Vector3<f64> {
    gain * handle_force
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn after_opt() -> DeltaParams {
        DeltaParams::derive(64.0, 40.0, 27.0, 12.4).unwrap()
    }

    #[test]
    fn radii_for_after_opt_row() {
        let p = after_opt();
        assert!((p.platform_radius - 32.6958).abs() < 1e-3);
        assert!((p.base_radius - 61.7512).abs() < 1e-3);
        let expected_rb = p.platform_radius + 64.0 * 27f64.to_radians().sin();
        assert!((p.base_radius - expected_rb).abs() < 1e-9);
    }

    #[test]
    fn radii_for_before_opt_row() {
        let p = DeltaParams::derive(86.0, 25.0, 21.0, 12.4).unwrap();
        assert!((p.platform_radius - 24.9).abs() < 0.05);
        assert!((p.base_radius - 55.7).abs() < 0.05);
    }

    #[test]
    fn zero_joint_radius_limit() {
        for w in [10.0, 25.0, 40.0] {
            assert_relative_eq!(platform_radius_for(w, 0.0), w / 3f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sr_radius_inverse() {
        let r = sr_radius_for(25.0, 24.9).unwrap();
        assert!((r - 12.4).abs() < 1e-3);
        assert_relative_eq!(platform_radius_for(25.0, r), 24.9, epsilon = 1e-12);
        assert!(sr_radius_for(30.0, 0.99 * 30.0 / 3f64.sqrt()).is_err());
    }

    #[test]
    fn derive_rejects_bad_inputs() {
        assert!(DeltaParams::derive(-1.0, 40.0, 27.0, 12.4).is_err());
        assert!(DeltaParams::derive(64.0, 0.0, 27.0, 12.4).is_err());
        assert!(DeltaParams::derive(64.0, 40.0, 0.0, 12.4).is_err());
        assert!(DeltaParams::derive(64.0, 40.0, 90.0, 12.4).is_err());
        assert!(DeltaParams::derive(64.0, 40.0, 27.0, f64::NAN).is_err());
        assert!(DeltaParams::derive(f64::INFINITY, 40.0, 27.0, 12.4).is_err());
    }

    #[test]
    fn rail_azimuths_must_differ() {
        assert!(after_opt().with_rail_azimuths_deg([0.0, 120.0, 360.0]).is_err());
        assert!(after_opt().with_rail_azimuths_deg([15.0, 135.0, 255.0]).is_ok());
    }

    #[test]
    fn centered_ik() {
        let p = after_opt();
        for z in [0.0, 30.0, 100.0] {
            let q = inverse_kinematics(&p, &PlatformPose::new(0.0, 0.0, z)).unwrap();
            for qi in q.q {
                assert_relative_eq!(qi, z - 64.0 * 27f64.to_radians().cos(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ik_unreachable_names_leg() {
        let p = after_opt();
        // far along -u_0 (u_0 = +y): leg 0 over-stretches
        let err = inverse_kinematics(&p, &PlatformPose::new(0.0, -40.0, 50.0)).unwrap_err();
        match err {
            ModelError::Unreachable { leg, gap, .. } => {
                assert_eq!(leg, 0);
                assert!(gap > 64.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn centered_fk() {
        let p = after_opt();
        let q0 = 100.0 - 64.0 * 27f64.to_radians().cos();
        let pose = forward_kinematics(&p, &JointPositions::new(q0, q0, q0)).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(0.0, 0.0, 100.0), epsilon = 1e-9);
    }

    #[test]
    fn collinear_centers_are_singular() {
        let c = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(10.0, 0.0, 0.0),
            Vector3::new(20.0, 0.0, 0.0),
        ];
        assert!(matches!(trilaterate(&c, 30.0), Err(ModelError::Singular { .. })));
        let same = [Vector3::zeros(), Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)];
        assert!(matches!(trilaterate(&same, 30.0), Err(ModelError::Singular { .. })));
    }

    #[test]
    fn fk_no_intersection() {
        let p = after_opt();
        // sliders pulled far apart vertically
        let err = forward_kinematics(&p, &JointPositions::new(0.0, 200.0, -200.0)).unwrap_err();
        assert!(matches!(err, ModelError::Unreachable { .. }));
    }

    #[test]
    fn jacobian_pure_z() {
        let p = after_opt();
        let j = jacobian(&p, &PlatformPose::new(0.0, 0.0, 57.0)).unwrap();
        let qdot = j * Vector3::z();
        for v in qdot.iter() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_horizontal_link_singular() {
        let p = after_opt();
        // move P away from rail 0 until that leg's link is (almost) horizontal
        let u0 = p.radial(0);
        let shift = p.radial_gap() - p.link_length + 1e-12;
        let pose = PlatformPose {
            position: Vector3::new(0.0, 0.0, 50.0) + u0 * shift,
        };
        let err = jacobian(&p, &pose).unwrap_err();
        assert!(matches!(err, ModelError::Singular { .. }), "{err:?}");
    }

    #[test]
    fn centered_condition_number_closed_form() {
        // JᵀJ = diag(1.5 tan²ψ, 1.5 tan²ψ, 3) at the centered pose
        let p = after_opt();
        let j = jacobian(&p, &p.home_pose()).unwrap();
        let t = p.offset_angle.tan();
        let expect = 3f64.sqrt() / (1.5f64.sqrt() * t);
        assert_relative_eq!(condition_number(&j), expect, epsilon = 1e-10);
    }

    #[test]
    fn swing_zero_under_pure_z() {
        let p = after_opt();
        for z in [-30.0, 0.0, 12.5, 30.0] {
            let s = joint_swing_angles(&p, &p.home_pose().translated(&Vector3::new(0.0, 0.0, z)))
                .unwrap();
            for a in s {
                assert!(a.abs() < 1e-7, "{a}");
            }
        }
        let s = joint_swing_angles(&p, &PlatformPose::new(5.0, -3.0, 40.0)).unwrap();
        assert!(s.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn chain_identity_and_roll() {
        let p = after_opt();
        let q = inverse_kinematics(&p, &PlatformPose::new(3.0, -2.0, 60.0)).unwrap();
        let t = full_chain_fk(&p, &q, &ArmConfig::default()).unwrap();
        assert_relative_eq!(t.translation, Vector3::new(3.0, -2.0, 60.0), epsilon = 1e-9);

        let arm = ArmConfig {
            d2: 10.0,
            roll: 90f64.to_radians(),
            ..Default::default()
        };
        // roll beyond the ±45° range is rejected by the checked chain
        assert!(matches!(full_chain_fk(&p, &q, &arm), Err(ModelError::OutOfRange { .. })));
        let tip = RigidTransform::translation(Vector3::new(3.0, -2.0, 60.0))
            .then(&arm.platform_to_tip())
            .translation;
        assert_relative_eq!(tip, Vector3::new(13.0, -2.0, 60.0), epsilon = 1e-9);
    }

    #[test]
    fn admittance_is_linear() {
        let g = Matrix3::new(2.0, 0.1, 0.0, 0.0, 1.5, -0.3, 0.2, 0.0, 0.7);
        assert_eq!(admittance_velocity(&g, &Vector3::zeros()), Vector3::zeros());
        let c = 3.5;
        assert_eq!(
            admittance_velocity(&(Matrix3::identity() * c), &Vector3::x()),
            Vector3::new(c, 0.0, 0.0)
        );
        let f = Vector3::new(0.4, -1.2, 2.0);
        assert_relative_eq!(
            admittance_velocity(&g, &(2.0 * f)),
            2.0 * admittance_velocity(&g, &f),
            epsilon = 1e-15
        );
    }
}
