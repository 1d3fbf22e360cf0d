use approx::assert_relative_eq;
use delta_core::kinematics::{
    derive_radii, forward_kinematics, inverse_kinematics, jacobian, solve_legs, ArmConfig,
    DeltaParams, PlatformPose,
};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn after_opt() -> DeltaParams {
    DeltaParams::derive(64.0, 40.0, 27.0, 12.4).unwrap()
}

/// Offset inside the 55 × 60 mm cylinder.
fn cylinder_offset() -> impl Strategy<Value = Vector3<f64>> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU, -30.0..30.0f64)
        .prop_map(|(s, t, z)| {
            let r = 27.5 * s.sqrt();
            Vector3::new(r * t.cos(), r * t.sin(), z)
        })
}

fn design() -> impl Strategy<Value = DeltaParams> {
    (60.0..90.0f64, 25.0..40.0f64, 18.0..32.0f64)
        .prop_map(|(l, w, psi)| DeltaParams::derive(l, w, psi, 12.4).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn fk_inverts_ik(offset in cylinder_offset()) {
        let p = after_opt();
        let pose = p.home_pose().translated(&offset);
        let q = inverse_kinematics(&p, &pose).unwrap();
        let back = forward_kinematics(&p, &q).unwrap();
        prop_assert!((back.position - pose.position).norm() < 1e-9);
    }

    #[test]
    fn legs_keep_their_length(offset in cylinder_offset(), p in design()) {
        let pose = p.home_pose().translated(&(offset * 0.3));
        if let Ok(legs) = solve_legs(&p, &pose) {
            for leg in legs {
                prop_assert!(((leg.platform_joint - leg.slider).norm() - p.link_length).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(offset in cylinder_offset()) {
        let p = after_opt();
        let pose = p.home_pose().translated(&offset);
        let j = jacobian(&p, &pose).unwrap();
        let h = 1e-4;
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let plus = inverse_kinematics(&p, &pose.translated(&e)).unwrap();
            let minus = inverse_kinematics(&p, &pose.translated(&(-e))).unwrap();
            for i in 0..3 {
                let fd = (plus.q[i] - minus.q[i]) / (2.0 * h);
                prop_assert!((fd - j[(i, k)]).abs() <= 1e-5 * j.norm(), "{fd} vs {}", j[(i, k)]);
            }
        }
    }

    #[test]
    fn vertical_motion_is_decoupled(dz in -30.0..30.0f64, p in design()) {
        let home = inverse_kinematics(&p, &p.home_pose()).unwrap();
        let q = inverse_kinematics(&p, &p.home_pose().translated(&Vector3::new(0.0, 0.0, dz))).unwrap();
        for i in 0..3 {
            prop_assert!((q.q[i] - home.q[i] - dz).abs() < 1e-9);
        }
    }

    #[test]
    fn radii_grow_with_width_and_angle(l in 60.0..90.0f64, w in 25.0..39.0f64, psi in 18.0..31.0f64) {
        let base = derive_radii(l, w, psi, 12.4).unwrap();
        let wider = derive_radii(l, w + 1.0, psi, 12.4).unwrap();
        let steeper = derive_radii(l, w, psi + 1.0, 12.4).unwrap();
        prop_assert!(wider.platform_radius > base.platform_radius);
        prop_assert!(wider.base_radius > base.base_radius);
        prop_assert!(steeper.platform_radius == base.platform_radius);
        prop_assert!(steeper.base_radius > base.base_radius);
    }

    #[test]
    fn arm_chain_rotations_stay_orthonormal(roll in -0.78..0.78f64, tilt in -2.0..2.0f64) {
        let arm = ArmConfig { roll, tilt, ..ArmConfig::default() };
        let t = arm.platform_to_tip();
        let r = t.rotation.matrix();
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn home_pose_has_zero_sliders() {
    let p = after_opt();
    let q = inverse_kinematics(&p, &p.home_pose()).unwrap();
    for v in q.q {
        assert!(v.abs() < 1e-12);
    }
}

#[test]
fn rotated_rails_give_rotated_solution() {
    let p = after_opt();
    let rotated = p.with_rail_azimuths_deg([105.0, 225.0, 345.0]).unwrap();
    let pose = PlatformPose::new(5.0, -3.0, 60.0);
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 15f64.to_radians());
    let turned = PlatformPose { position: rot * pose.position };
    let a = inverse_kinematics(&p, &pose).unwrap();
    let b = inverse_kinematics(&rotated, &turned).unwrap();
    for i in 0..3 {
        assert_relative_eq!(a.q[i], b.q[i], epsilon = 1e-9);
    }
}
