//! Synthetic bench logs and brute-force oracles shared by test targets.
#![allow(dead_code)]

use std::collections::HashMap;

use delta_core::bench::{CameraPlane, ForceDeflectionLog, GridLog, GridRecord, TraceSample};
use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const PLANES: [CameraPlane; 2] = [CameraPlane::Xz, CameraPlane::Yz];

/// 3×3 grid of targets spaced `step` mm in the x-z and y-z planes, each seen
/// by its own camera and visited `repeats` times.
pub fn synthetic_log(rng: &mut ChaCha8Rng, step: f64, repeats: u32, sigma: [f64; 3], bias: [f64; 3]) -> GridLog {
    let mut records = Vec::new();
    for plane in PLANES {
        let [a, b] = plane.axes();
        for i in 0..3 {
            for k in 0..3 {
                let mut c = [0.0; 3];
                c[a] = step * i as f64;
                c[b] = step * k as f64;
                for r in 0..repeats {
                    let m = [a, b].map(|ax| {
                        let noise = Normal::new(0.0, sigma[ax]).unwrap().sample(rng);
                        c[ax] * 1000.0 * (1.0 + bias[ax]) + noise
                    });
                    records.push(GridRecord {
                        target_id: format!("{}-{i}{k}", plane.label()),
                        commanded: Vector3::from(c),
                        plane,
                        measured: m,
                        repeat: r,
                    });
                }
            }
        }
    }
    GridLog { records }
}

/// Brute force over record pairs: per-target means, then every aligned pair.
pub fn accuracy_oracle(log: &GridLog, step: f64) -> HashMap<(usize, usize), Vec<f64>> {
    // (target, plane) -> (measurement sums, visits, commanded position)
    type Sums = HashMap<(String, CameraPlane), ([f64; 2], usize, Vector3<f64>)>;
    let mut sums = Sums::new();
    for r in &log.records {
        let e = sums.entry((r.target_id.clone(), r.plane)).or_insert(([0.0; 2], 0, r.commanded));
        e.0[0] += r.measured[0];
        e.0[1] += r.measured[1];
        e.1 += 1;
    }
    let targets: Vec<_> = sums.into_iter().collect();
    let mut out: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for (ka, (sa, na, ca)) in &targets {
        for (kb, (sb, nb, cb)) in &targets {
            if ka.1 != kb.1 || ka.0 >= kb.0 {
                continue;
            }
            let d = cb - ca;
            let moving: Vec<usize> = (0..3).filter(|&k| d[k].abs() > 1e-6).collect();
            if moving.len() != 1 || (d[moving[0]].abs() - step).abs() > 1e-6 {
                continue;
            }
            let axis = moving[0];
            let sign = d[axis].signum();
            for (slot, &m) in ka.1.axes().iter().enumerate() {
                let moved = sign * (sb[slot] / *nb as f64 - sa[slot] / *na as f64);
                let intended = if m == axis { step * 1000.0 } else { 0.0 };
                out.entry((axis, m)).or_default().push((moved - intended).abs());
            }
        }
    }
    out
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Per-axis average of the per-target population std, over targets with repeats.
pub fn repeatability_oracle(log: &GridLog) -> [Option<f64>; 3] {
    let mut visits: HashMap<(String, CameraPlane), Vec<[f64; 2]>> = HashMap::new();
    for r in &log.records {
        visits.entry((r.target_id.clone(), r.plane)).or_default().push(r.measured);
    }
    let mut per_axis: [Vec<f64>; 3] = Default::default();
    for ((_, plane), ms) in &visits {
        if ms.len() < 2 {
            continue;
        }
        for (slot, &axis) in plane.axes().iter().enumerate() {
            let v: Vec<f64> = ms.iter().map(|m| m[slot]).collect();
            per_axis[axis].push(mean_std(&v).1);
        }
    }
    per_axis.map(|v| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64))
}

/// Relative disagreement of two values, scaled so that values near zero compare absolutely.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn noisy_trace(rng: &mut ChaCha8Rng, slope: f64, sigma: f64) -> ForceDeflectionLog {
    let noise = Normal::new(0.0, sigma).unwrap();
    let samples = (0..400)
        .map(|i| {
            let t = 0.05 * i as f64;
            // loading cycle between about -6 N and 8 N
            let f = 1.0 + 7.0 * (0.7 * t).sin();
            TraceSample {
                t,
                force: Vector3::new(f, 0.3 * f, -0.5 * f),
                displacement: Vector3::new(
                    slope * f + 40.0 + noise.sample(rng),
                    noise.sample(rng),
                    noise.sample(rng),
                ),
            }
        })
        .collect();
    ForceDeflectionLog { position_mm: Some([1.0, 1.0]), samples }
}

