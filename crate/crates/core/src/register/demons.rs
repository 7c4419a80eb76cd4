//! Fast symmetric-forces demons.
//!
//! Per iteration, with `W = M(x + s(x))` and `D = F − W`:
//!
//! ```text
//! J = (∇F + ∇W) / 2
//! u = D · J / (|J|² + D² / K),   K = 4 · max_step²   (so |u| ≤ max_step)
//! s ← G_total * (s + G_update * u)
//! ```
//!
//! The field is kept in voxel units internally and runs coarse-to-fine over
//! a Gaussian pyramid; the result is returned in millimetres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{gaussian_smooth_vec, gradient, sample_trilinear_clamped};
use crate::register::pyramid;
use crate::register::transform::{norm, DisplacementField};
use crate::volume::Volume3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemonsParams {
    /// Iterations per level, coarse to fine. A single entry applies to
    /// every level.
    pub iterations: Vec<usize>,
    pub levels: usize,
    /// Smoothing of each update (fluid-like), σ in voxels.
    pub update_sigma: f64,
    /// Smoothing of the accumulated field (diffusion-like), σ in voxels.
    pub field_sigma: f64,
    /// Largest update per iteration, in voxels of the current level.
    pub max_step: f64,
}

impl Default for DemonsParams {
    fn default() -> Self {
        DemonsParams {
            iterations: vec![40, 30, 20],
            levels: 3,
            update_sigma: 1.0,
            field_sigma: 1.5,
            max_step: 1.25,
        }
    }
}

impl DemonsParams {
    pub fn validate(&self) -> Result<()> {
        let lengths_ok = self.iterations.len() == self.levels || self.iterations.len() == 1;
        if self.levels == 0
            || !lengths_ok
            || !(self.update_sigma > 0.0)
            || !(self.field_sigma > 0.0)
            || !(self.max_step > 0.0)
        {
            return Err(Error::InvalidParameter(format!("invalid demons params {self:?}")));
        }
        Ok(())
    }

    fn iterations_at(&self, level: usize) -> usize {
        if self.iterations.len() == 1 {
            self.iterations[0]
        } else {
            self.iterations[level]
        }
    }

    /// Upper bound on any displacement the registration can produce, in
    /// finest-level voxels.
    pub fn displacement_bound_voxels(&self) -> f64 {
        (0..self.levels)
            .map(|l| {
                let scale = (1u64 << (self.levels - 1 - l)) as f64;
                self.max_step * self.iterations_at(l) as f64 * scale
            })
            .sum()
    }
}

/// Mean squared intensity difference between `fixed` and `moving` warped by
/// a field given in voxel units (edge-clamped sampling).
fn warped_mse(fixed: &[f64], moving: &[f64], dims: [usize; 3], s: &[[f64; 3]]) -> f64 {
    let warped = warp_voxels(moving, dims, s);
    fixed.iter().zip(&warped).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / fixed.len() as f64
}

fn warp_voxels(moving: &[f64], dims: [usize; 3], s: &[[f64; 3]]) -> Vec<f64> {
    let [nx, ny, _] = dims;
    s.iter()
        .enumerate()
        .map(|(i, d)| {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            sample_trilinear_clamped(moving, dims, [x as f64 + d[0], y as f64 + d[1], z as f64 + d[2]])
        })
        .collect()
}

/// Upsamples a voxel-unit field from a coarse grid onto `fine` dims,
/// doubling magnitudes along axes that were halved.
fn upsample(field: &[[f64; 3]], coarse: [usize; 3], fine: [usize; 3]) -> Vec<[f64; 3]> {
    let factor: [f64; 3] = std::array::from_fn(|a| if fine[a] > coarse[a] { 2.0 } else { 1.0 });
    let comps: Vec<Vec<f64>> = (0..3).map(|c| field.iter().map(|v| v[c]).collect()).collect();
    let mut out = Vec::with_capacity(fine[0] * fine[1] * fine[2]);
    for z in 0..fine[2] {
        for y in 0..fine[1] {
            for x in 0..fine[0] {
                let idx = [x as f64 / factor[0], y as f64 / factor[1], z as f64 / factor[2]];
                out.push(std::array::from_fn(|c| {
                    sample_trilinear_clamped(&comps[c], coarse, idx) * factor[c]
                }));
            }
        }
    }
    out
}

/// Outcome of a demons run, including the similarity before and after.
#[derive(Clone, Debug)]
pub struct DemonsResult {
    pub field: DisplacementField,
    pub mse_before: f64,
    pub mse_after: f64,
}

/// Non-rigid registration of `moving` onto `fixed` (same dims required).
pub fn demons_register(fixed: &Volume3, moving: &Volume3, params: &DemonsParams) -> Result<DisplacementField> {
    demons_register_detailed(fixed, moving, params).map(|r| r.field)
}

pub fn demons_register_detailed(fixed: &Volume3, moving: &Volume3, params: &DemonsParams) -> Result<DemonsResult> {
    params.validate()?;
    fixed.geometry().ensure_same_dims(moving.geometry(), "demons_register")?;
    let k = 4.0 * params.max_step * params.max_step;

    let fixed_levels = pyramid(fixed, params.levels);
    let moving_levels = pyramid(moving, params.levels);
    let mut s: Vec<[f64; 3]> = vec![[0.0; 3]; fixed_levels[0].len()];
    let mut prev_dims = fixed_levels[0].dims();

    for (level, (fl, ml)) in fixed_levels.iter().zip(&moving_levels).enumerate() {
        let dims = fl.dims();
        if level > 0 {
            s = upsample(&s, prev_dims, dims);
        }
        prev_dims = dims;
        let fdata = fl.data();
        let mdata = ml.data();
        let grad_f = gradient(fdata, dims);
        for it in 0..params.iterations_at(level) {
            let warped = warp_voxels(mdata, dims, &s);
            let grad_w = gradient(&warped, dims);
            let update: Vec<[f64; 3]> = (0..s.len())
                .map(|i| {
                    let diff = fdata[i] - warped[i];
                    let j = [
                        0.5 * (grad_f[i][0] + grad_w[i][0]),
                        0.5 * (grad_f[i][1] + grad_w[i][1]),
                        0.5 * (grad_f[i][2] + grad_w[i][2]),
                    ];
                    let denom = j[0] * j[0] + j[1] * j[1] + j[2] * j[2] + diff * diff / k;
                    if denom < 1e-12 || diff == 0.0 {
                        return [0.0; 3];
                    }
                    let mut u = [diff * j[0] / denom, diff * j[1] / denom, diff * j[2] / denom];
                    let n = norm(u);
                    if n > params.max_step {
                        u.iter_mut().for_each(|c| *c *= params.max_step / n);
                    }
                    u
                })
                .collect();
            if update.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("demons update at level {level}, iteration {it}")));
            }
            let sigma_u = [params.update_sigma; 3];
            let update = gaussian_smooth_vec(&update, dims, sigma_u);
            for (si, ui) in s.iter_mut().zip(&update) {
                for c in 0..3 {
                    si[c] += ui[c];
                }
            }
            s = gaussian_smooth_vec(&s, dims, [params.field_sigma; 3]);
        }
    }

    let dims = fixed.dims();
    let mse_before = warped_mse(fixed.data(), moving.data(), dims, &vec![[0.0; 3]; fixed.len()]);
    let mse_after = warped_mse(fixed.data(), moving.data(), dims, &s);
    let spacing = fixed.spacing();
    let data = s
        .iter()
        .map(|v| [v[0] * spacing[0], v[1] * spacing[1], v[2] * spacing[2]])
        .collect();
    Ok(DemonsResult {
        field: DisplacementField::new(*fixed.geometry(), data)?,
        mse_before,
        mse_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::smooth_blob_phantom;

    #[test]
    fn identical_images_give_zero_field() {
        let f = smooth_blob_phantom(24, 3);
        let field = demons_register(&f, &f, &DemonsParams::default()).unwrap();
        assert!(field.mean_magnitude_voxels() < 0.05);
    }

    #[test]
    fn zero_iterations_give_zero_field() {
        let f = smooth_blob_phantom(16, 4);
        let m = smooth_blob_phantom(16, 5);
        let params = DemonsParams {
            iterations: vec![0],
            ..Default::default()
        };
        let field = demons_register(&f, &m, &params).unwrap();
        assert_eq!(field.max_magnitude_voxels(), 0.0);
    }

    #[test]
    fn displacement_respects_step_bound() {
        let f = smooth_blob_phantom(16, 6);
        let m = smooth_blob_phantom(16, 7);
        let params = DemonsParams {
            iterations: vec![3],
            levels: 1,
            max_step: 0.5,
            ..Default::default()
        };
        let field = demons_register(&f, &m, &params).unwrap();
        assert!(field.max_magnitude_voxels() <= params.displacement_bound_voxels() + 1e-9);
        assert_eq!(params.displacement_bound_voxels(), 1.5);
    }

    #[test]
    fn rejects_mismatched_dims_and_bad_params() {
        let f = smooth_blob_phantom(16, 1);
        let m = smooth_blob_phantom(12, 1);
        assert!(matches!(
            demons_register(&f, &m, &DemonsParams::default()),
            Err(Error::GeometryMismatch(_))
        ));
        let bad = DemonsParams {
            iterations: vec![1, 2],
            ..Default::default()
        };
        assert!(demons_register(&f, &f, &bad).is_err());
    }
}
