//! Analytic AHA partition of a myocardium mask around a long axis.
//!
//! Each voxel gets a longitudinal fraction `u` (0 at the base, 1 at the
//! apex) and an angle `ψ` measured counter-clockwise from the RV insertion
//! direction. In-plane, `e1` is the x axis projected off the long axis (the
//! y axis when the long axis is along x) and `e2 = axis × e1`.
//!
//! Basal and mid rings use six 60° sectors with sector `k` covering
//! `(k·60°, (k+1)·60°]`; the apical ring uses four 90° sectors shifted by
//! −30° so that they straddle the mid-ring boundaries. A voxel exactly on a
//! boundary therefore goes to the lower-numbered segment.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Mask3};

/// Longitudinal split points as fractions of the myocardial extent from
/// base (0) to apex (1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RingSplits {
    pub basal_mid: f64,
    pub mid_apical: f64,
    /// Voxels beyond this fraction form the apex cap (segment 17).
    pub apex: f64,
}

impl Default for RingSplits {
    fn default() -> Self {
        RingSplits {
            basal_mid: 1.0 / 3.0,
            mid_apical: 2.0 / 3.0,
            apex: 0.9,
        }
    }
}

impl RingSplits {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.basal_mid
            && self.basal_mid <= self.mid_apical
            && self.mid_apical <= self.apex
            && self.apex <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("ring splits must be ordered in [0, 1]: {self:?}")))
        }
    }
}

/// Sector index in `0..n` for `psi ∈ [0, 2π)`; boundaries go to the lower
/// sector and `ψ = 0` to sector 0.
fn sector(psi: f64, n: usize) -> usize {
    let w = 2.0 * PI / n as f64;
    let k = (psi / w).ceil() as i64 - 1;
    k.clamp(0, n as i64 - 1) as usize
}

/// Segment for a longitudinal fraction `u` and angle `psi ∈ [0, 2π)`.
pub(crate) fn segment_for(u: f64, psi: f64, splits: &RingSplits) -> u16 {
    if u > splits.apex {
        17
    } else if u < splits.basal_mid {
        1 + sector(psi, 6) as u16
    } else if u < splits.mid_apical {
        7 + sector(psi, 6) as u16
    } else {
        let shifted = (psi + PI / 6.0).rem_euclid(2.0 * PI);
        13 + sector(shifted, 4) as u16
    }
}

/// Builds the orthonormal in-plane basis for a unit long axis.
pub(crate) fn in_plane_basis(axis: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let reference = if axis[1].abs() < 1e-12 && axis[2].abs() < 1e-12 {
        [0.0, 1.0, 0.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let d = dot(reference, axis);
    let mut e1 = [reference[0] - d * axis[0], reference[1] - d * axis[1], reference[2] - d * axis[2]];
    let n = dot(e1, e1).sqrt();
    e1.iter_mut().for_each(|c| *c /= n);
    let e2 = [
        axis[1] * e1[2] - axis[2] * e1[1],
        axis[2] * e1[0] - axis[0] * e1[2],
        axis[0] * e1[1] - axis[1] * e1[0],
    ];
    (e1, e2)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Labels every myocardium voxel with an AHA segment; background stays 0.
/// `long_axis` points from base to apex and must have unit norm.
pub fn analytic_partition(
    myo: &Mask3,
    long_axis: [f64; 3],
    rv_insertion_angle: f64,
    splits: &RingSplits,
) -> Result<LabelVolume> {
    splits.validate()?;
    let len = dot(long_axis, long_axis).sqrt();
    if !len.is_finite() || (len - 1.0).abs() >= 1e-6 {
        return Err(Error::InvalidParameter(format!("long axis must be unit norm, got |a| = {len}")));
    }
    if !rv_insertion_angle.is_finite() {
        return Err(Error::InvalidParameter("rv insertion angle must be finite".into()));
    }
    let g = *myo.geometry();
    let [nx, ny, _] = g.dims;
    let points: Vec<(usize, [f64; 3])> = myo
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            (i, g.to_physical([x as f64, y as f64, z as f64]))
        })
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for (_, p) in &points {
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    let (e1, e2) = in_plane_basis(long_axis);
    let heights: Vec<f64> = points
        .iter()
        .map(|(_, p)| dot([p[0] - c[0], p[1] - c[1], p[2] - c[2]], long_axis))
        .collect();
    let h_min = heights.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_max = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let extent = h_max - h_min;

    let mut labels = vec![0u16; g.len()];
    for ((i, p), h) in points.iter().zip(&heights) {
        let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        let u = if extent > 0.0 { (h - h_min) / extent } else { 0.0 };
        let psi = (dot(d, e2).atan2(dot(d, e1)) - rv_insertion_angle).rem_euclid(2.0 * PI);
        labels[*i] = segment_for(u, psi, splits);
    }
    LabelVolume::new(g, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    #[test]
    fn boundaries_go_to_lower_segment() {
        let s = RingSplits::default();
        assert_eq!(segment_for(0.0, 0.0, &s), 1);
        assert_eq!(segment_for(0.0, PI / 3.0, &s), 1);
        assert_eq!(segment_for(0.0, PI / 3.0 + 1e-9, &s), 2);
        assert_eq!(segment_for(0.5, 2.0 * PI - 1e-9, &s), 12);
        assert_eq!(segment_for(0.8, 0.0, &s), 13);
        assert_eq!(segment_for(0.8, PI / 3.0 - 1e-9, &s), 13);
        assert_eq!(segment_for(0.8, PI / 3.0 + 1e-9, &s), 14);
        assert_eq!(segment_for(0.8, 11.0 * PI / 6.0 - 1e-9, &s), 16);
        assert_eq!(segment_for(0.95, 1.0, &s), 17);
    }

    #[test]
    fn all_apical_split_uses_apical_labels_only() {
        let g = Geometry::new([12, 12, 6], [1.0; 3]).unwrap();
        let myo = Mask3::from_fn(g, |x, y, _| {
            let r = ((x as f64 - 5.5).powi(2) + (y as f64 - 5.5).powi(2)).sqrt();
            (2.0..5.0).contains(&r)
        });
        let splits = RingSplits {
            basal_mid: 0.0,
            mid_apical: 0.0,
            apex: 0.9,
        };
        let l = analytic_partition(&myo, [0.0, 0.0, 1.0], 0.0, &splits).unwrap();
        for (&label, &m) in l.data().iter().zip(myo.data()) {
            assert_eq!(m, label > 0);
            assert!(label == 0 || label >= 13);
        }
    }

    #[test]
    fn rejects_empty_mask_and_bad_axis() {
        let g = Geometry::new([4, 4, 4], [1.0; 3]).unwrap();
        let empty = Mask3::filled(g, false);
        assert!(matches!(
            analytic_partition(&empty, [0.0, 0.0, 1.0], 0.0, &RingSplits::default()),
            Err(Error::EmptyMask)
        ));
        let full = Mask3::filled(g, true);
        assert!(analytic_partition(&full, [0.0, 0.0, 2.0], 0.0, &RingSplits::default()).is_err());
    }

    #[test]
    fn basis_is_orthonormal_and_right_handed() {
        for axis in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.6, 0.8]] {
            let (e1, e2) = in_plane_basis(axis);
            assert!(dot(e1, axis).abs() < 1e-12 && dot(e2, axis).abs() < 1e-12);
            assert!(dot(e1, e2).abs() < 1e-12);
            assert!((dot(e1, e1) - 1.0).abs() < 1e-12 && (dot(e2, e2) - 1.0).abs() < 1e-12);
        }
        assert_eq!(in_plane_basis([0.0, 0.0, 1.0]), ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]));
    }
}
