//! Unit conversions used at module boundaries.
//!
//! Internal conventions: lengths in mm, forces in N, torques in N·mm,
//! angles in rad. Link deflections and platform translations are in µm.
//! Because the deflection model mixes µm (deflection) with mm (geometry),
//! the angular part of a platform deflection comes out in µm/mm, i.e. mrad.

pub const MM_PER_M: f64 = 1000.0;
pub const UM_PER_MM: f64 = 1000.0;

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}

/// N·m → N·mm.
pub fn nm_to_nmm(torque_nm: f64) -> f64 {
    torque_nm * MM_PER_M
}

/// N·mm → N·m.
pub fn nmm_to_nm(torque_nmm: f64) -> f64 {
    torque_nmm / MM_PER_M
}

/// Angle carried in µm/mm (milliradians) → degrees.
pub fn mrad_to_deg(mrad: f64) -> f64 {
    (mrad / 1000.0).to_degrees()
}

/// Degrees → µm/mm (milliradians).
pub fn deg_to_mrad(deg: f64) -> f64 {
    deg.to_radians() * 1000.0
}
