//! Rigid registration maximising mutual information with a multiresolution
//! compass (pattern) search over three Euler angles and three translations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::sample_trilinear;
use crate::register::mi::{Binning, JointHistogram};
use crate::register::pyramid;
use crate::register::transform::{apply_with, RigidTransform};
use crate::volume::Volume3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigidConfig {
    pub bins: usize,
    /// Pyramid levels (1 = full resolution only).
    pub levels: usize,
    /// Initial translation step, in voxels of the current level.
    pub translation_step_voxels: f64,
    /// Initial rotation step in radians.
    pub angle_step: f64,
    /// Search stops at the finest level once steps fall below these.
    pub min_translation_step_voxels: f64,
    pub min_angle_step: f64,
    pub max_evaluations_per_level: usize,
    /// Fraction of fixed voxels that must map inside the moving image.
    pub min_overlap_fraction: f64,
}

impl Default for RigidConfig {
    fn default() -> Self {
        RigidConfig {
            bins: 32,
            levels: 3,
            translation_step_voxels: 2.0,
            angle_step: 0.04,
            min_translation_step_voxels: 0.02,
            min_angle_step: 0.0005,
            max_evaluations_per_level: 4000,
            min_overlap_fraction: 0.25,
        }
    }
}

impl RigidConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.bins >= 2
            && self.levels >= 1
            && self.translation_step_voxels > 0.0
            && self.angle_step > 0.0
            && self.min_translation_step_voxels > 0.0
            && self.min_angle_step > 0.0
            && self.max_evaluations_per_level > 0
            && (0.0..=1.0).contains(&self.min_overlap_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid rigid config {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidResult {
    pub transform: RigidTransform,
    pub initial_mi: f64,
    pub final_mi: f64,
    pub evaluations: usize,
}

struct Objective<'a> {
    fixed: &'a Volume3,
    moving: &'a Volume3,
    bin_f: Binning,
    bin_m: Binning,
    min_overlap: f64,
}

impl Objective<'_> {
    /// MI over fixed voxels that map inside the moving image; `None` when
    /// the overlap is too small.
    fn eval(&self, t: &RigidTransform) -> Option<f64> {
        let fg = self.fixed.geometry();
        let mg = *self.moving.geometry();
        let r = t.matrix();
        let [nx, ny, nz] = fg.dims;
        let fdata = self.fixed.data();
        let mdata = self.moving.data();
        let bins = self.bin_f.bins();
        let hist = (0..nz)
            .into_par_iter()
            .fold(
                || JointHistogram::new(bins, bins),
                |mut h, z| {
                    for y in 0..ny {
                        for x in 0..nx {
                            let p = fg.to_physical([x as f64, y as f64, z as f64]);
                            let q = apply_with(&r, t, p);
                            if let Some(mv) = sample_trilinear(mdata, mg.dims, mg.to_index(q)) {
                                let fv = fdata[x + nx * (y + ny * z)];
                                h.add(self.bin_f.bin(fv), self.bin_m.bin(mv));
                            }
                        }
                    }
                    h
                },
            )
            .reduce(|| JointHistogram::new(bins, bins), |a, b| a.merge(&b));
        let overlap = hist.total() as f64 / fg.len() as f64;
        if hist.total() == 0 || overlap < self.min_overlap {
            return None;
        }
        Some(hist.mutual_information())
    }
}

fn params_to_transform(p: &[f64; 6], center: [f64; 3]) -> RigidTransform {
    RigidTransform {
        angles: [p[0], p[1], p[2]],
        translation: [p[3], p[4], p[5]],
        center,
    }
}

/// Registers `moving` to `fixed`. The returned transform maps fixed-grid
/// points into the moving image, i.e. `warp(moving, &t)` aligns with
/// `fixed`. Rotations are about the fixed image centre.
pub fn rigid_register(fixed: &Volume3, moving: &Volume3, config: &RigidConfig) -> Result<RigidResult> {
    config.validate()?;
    if fixed.geometry().orientation != moving.geometry().orientation {
        return Err(Error::GeometryMismatch("orientation codes differ".into()));
    }
    let center = fixed.geometry().center();
    let bin_f = Binning::of(fixed.data(), config.bins);
    let bin_m = Binning::of(moving.data(), config.bins);

    let full = Objective {
        fixed,
        moving,
        bin_f,
        bin_m,
        min_overlap: config.min_overlap_fraction,
    };
    let identity = RigidTransform::identity(center);
    let initial_mi = full.eval(&identity).ok_or(Error::NoOverlap)?;
    if !initial_mi.is_finite() {
        return Err(Error::Diverged("initial MI is not finite".into()));
    }

    let fixed_levels = pyramid(fixed, config.levels);
    let moving_levels = pyramid(moving, config.levels);
    let mut p = [0.0f64; 6];
    let mut evaluations = 0usize;

    for (level, (fl, ml)) in fixed_levels.iter().zip(&moving_levels).enumerate() {
        let finest = level + 1 == config.levels;
        let obj = Objective {
            fixed: fl,
            moving: ml,
            bin_f,
            bin_m,
            min_overlap: config.min_overlap_fraction,
        };
        let voxel = fl.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
        let shrink = (1u32 << level) as f64;
        let mut steps = [
            config.angle_step / shrink,
            config.angle_step / shrink,
            config.angle_step / shrink,
            config.translation_step_voxels * voxel,
            config.translation_step_voxels * voxel,
            config.translation_step_voxels * voxel,
        ];
        let (min_t, min_a) = if finest {
            (config.min_translation_step_voxels * voxel, config.min_angle_step)
        } else {
            (0.25 * voxel, config.min_angle_step * 8.0)
        };
        let mut best = match obj.eval(&params_to_transform(&p, center)) {
            Some(v) => v,
            None => continue,
        };
        let mut level_evals = 1usize;
        while (steps[0] >= min_a || steps[3] >= min_t) && level_evals < config.max_evaluations_per_level {
            let mut cand_best: Option<([f64; 6], f64)> = None;
            for k in 0..6 {
                let limit = if k < 3 { min_a } else { min_t };
                if steps[k] < limit {
                    continue;
                }
                for sign in [1.0, -1.0] {
                    let mut q = p;
                    q[k] += sign * steps[k];
                    level_evals += 1;
                    if let Some(v) = obj.eval(&params_to_transform(&q, center)) {
                        if !v.is_finite() {
                            return Err(Error::Diverged(format!("MI became {v} at {q:?}")));
                        }
                        if v > best + 1e-12 && cand_best.is_none_or(|(_, b)| v > b) {
                            cand_best = Some((q, v));
                        }
                    }
                }
            }
            match cand_best {
                Some((q, v)) => {
                    p = q;
                    best = v;
                }
                None => steps.iter_mut().for_each(|s| *s *= 0.5),
            }
        }
        evaluations += level_evals;
    }

    let mut transform = params_to_transform(&p, center);
    let mut final_mi = full.eval(&transform).unwrap_or(f64::NEG_INFINITY);
    if final_mi < initial_mi {
        transform = identity;
        final_mi = initial_mi;
    }
    if !transform.is_finite() || !final_mi.is_finite() {
        return Err(Error::Diverged("non-finite result".into()));
    }
    Ok(RigidResult {
        transform,
        initial_mi,
        final_mi,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::smooth_blob_phantom;
    use crate::preprocess::Interp;
    use crate::register::warp;

    #[test]
    fn identical_images_give_identity() {
        let f = smooth_blob_phantom(32, 11);
        let r = rigid_register(&f, &f, &RigidConfig::default()).unwrap();
        let s = f.spacing()[0];
        for a in r.transform.angles {
            assert!(a.abs() < 0.01);
        }
        for t in r.transform.translation {
            assert!(t.abs() < 0.1 * s);
        }
        assert!(r.final_mi >= r.initial_mi);
    }

    #[test]
    fn recovers_translation() {
        let f = smooth_blob_phantom(32, 12);
        let truth = RigidTransform::translation([2.0, -1.0, 1.0], f.geometry().center());
        let m = warp(&f, &truth.inverse(), Interp::Trilinear).unwrap();
        let r = rigid_register(&f, &m, &RigidConfig::default()).unwrap();
        for a in 0..3 {
            assert!((r.transform.translation[a] - truth.translation[a]).abs() < 0.5, "{:?}", r.transform);
        }
        assert!(r.final_mi >= r.initial_mi);
    }

    #[test]
    fn disjoint_extents_are_rejected() {
        let f = smooth_blob_phantom(16, 1);
        let far = f.geometry().with_origin([1000.0, 0.0, 0.0]);
        let m = f.clone().with_geometry(far).unwrap();
        assert!(matches!(rigid_register(&f, &m, &RigidConfig::default()), Err(Error::NoOverlap)));
    }
}
