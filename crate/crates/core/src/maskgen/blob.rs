//! Procedural blobs: Gaussian-filtered white noise thresholded at an exact
//! quantile, so the foreground fraction equals the requested porosity up to
//! rounding to whole voxels.

use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::gaussian_smooth;
use crate::rng::white_noise;
use crate::volume::{Geometry, Mask3};

/// Noise correlation length in voxels for an isotropic blob.
pub const DEFAULT_BASE_SIGMA: f64 = 2.0;

pub(crate) fn validate_anisotropy(anisotropy: [f64; 3]) -> Result<()> {
    if anisotropy.iter().all(|a| a.is_finite() && *a >= 1.0) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("anisotropy ratios must be >= 1, got {anisotropy:?}")))
    }
}

pub(crate) fn validate_porosity(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("porosity must be in (0, 1], got {p}")))
    }
}

/// A realised smooth noise field stored as value ranks, so thresholds for
/// any porosity can be taken without resampling.
#[derive(Clone, Debug)]
pub struct BlobField {
    dims: [usize; 3],
    ranks: Vec<u32>,
}

impl BlobField {
    /// White noise smoothed with per-axis `sigma` in voxels.
    pub fn new(dims: [usize; 3], sigma: [f64; 3], rng: &mut impl Rng) -> Result<Self> {
        if !sigma.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("blob sigma must be positive, got {sigma:?}")));
        }
        let n = dims.iter().product::<usize>();
        let field = gaussian_smooth(&white_noise(rng, n), dims, sigma);
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by(|&a, &b| field[a as usize].total_cmp(&field[b as usize]).then(a.cmp(&b)));
        let mut ranks = vec![0u32; n];
        for (r, &i) in order.iter().enumerate() {
            ranks[i as usize] = r as u32;
        }
        Ok(BlobField { dims, ranks })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Foreground of the `round(p · N)` largest noise values.
    pub fn threshold(&self, porosity: f64) -> Vec<bool> {
        let n = self.ranks.len();
        let keep = (porosity.clamp(0.0, 1.0) * n as f64).round() as usize;
        let cut = (n - keep) as u32;
        self.ranks.iter().map(|&r| r >= cut).collect()
    }
}

/// Blob on `geom` with foreground fraction `porosity`; noise σ per axis is
/// `DEFAULT_BASE_SIGMA · anisotropy` voxels.
pub fn generate_blob(geom: Geometry, porosity: f64, anisotropy: [f64; 3], rng: &mut impl Rng) -> Result<Mask3> {
    generate_blob_with_sigma(geom, porosity, anisotropy, DEFAULT_BASE_SIGMA, rng)
}

pub fn generate_blob_with_sigma(
    geom: Geometry,
    porosity: f64,
    anisotropy: [f64; 3],
    base_sigma: f64,
    rng: &mut impl Rng,
) -> Result<Mask3> {
    validate_porosity(porosity)?;
    validate_anisotropy(anisotropy)?;
    geom.validate()?;
    let field = BlobField::new(geom.dims, anisotropy.map(|a| a * base_sigma), rng)?;
    Mask3::new(geom, field.threshold(porosity))
}

/// Size-weighted mean of per-component central second moments along each
/// axis (voxel units), using 26-connectivity.
pub fn component_second_moments(m: &Mask3) -> [f64; 3] {
    let (labels, sizes) = super::morph::connected_components(m);
    let k = sizes.len();
    let mut sum = vec![[0.0f64; 3]; k];
    let mut sum_sq = vec![[0.0f64; 3]; k];
    let g = m.geometry();
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let c = g.coords(i);
        for a in 0..3 {
            sum[l as usize - 1][a] += c[a] as f64;
            sum_sq[l as usize - 1][a] += (c[a] * c[a]) as f64;
        }
    }
    let total: usize = sizes.iter().sum();
    let mut out = [0.0; 3];
    if total == 0 {
        return out;
    }
    for j in 0..k {
        let n = sizes[j] as f64;
        for a in 0..3 {
            let mean = sum[j][a] / n;
            let var = sum_sq[j][a] / n - mean * mean;
            out[a] += var * n / total as f64;
        }
    }
    out
}
