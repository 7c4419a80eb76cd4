//! Reorientation, resampling, bounding-box cropping and intensity
//! normalisation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{nearest_index, sample_trilinear};
use crate::volume::{Geometry, Grid, Mask3, Orientation, Volume3, Voxel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    #[default]
    Nearest,
    Trilinear,
}

/// Re-lays voxel data so the stored axes follow `target`. Spacing is
/// permuted with the axes; the origin is carried through unchanged.
pub fn reorient<T: Voxel>(v: &Grid<T>, target: Orientation) -> Result<Grid<T>> {
    Orientation::new(target.axes)?;
    let src = v.geometry();
    if src.orientation == target {
        return Ok(v.clone());
    }
    // reference-frame extents and spacings
    let mut ref_dims = [0usize; 3];
    let mut ref_spacing = [0.0f64; 3];
    for (i, a) in src.orientation.axes.iter().enumerate() {
        ref_dims[a.reference as usize] = src.dims[i];
        ref_spacing[a.reference as usize] = src.spacing[i];
    }
    let mut dims = [0usize; 3];
    let mut spacing = [0.0f64; 3];
    for (j, a) in target.axes.iter().enumerate() {
        dims[j] = ref_dims[a.reference as usize];
        spacing[j] = ref_spacing[a.reference as usize];
    }
    let geom = Geometry {
        dims,
        spacing,
        origin: src.origin,
        orientation: target,
    };
    let out = Grid::from_fn(geom, |x, y, z| {
        let q = [x, y, z];
        let mut r = [0usize; 3];
        for (j, a) in target.axes.iter().enumerate() {
            let n = ref_dims[a.reference as usize];
            r[a.reference as usize] = if a.flipped { n - 1 - q[j] } else { q[j] };
        }
        let mut s = [0usize; 3];
        for (i, a) in src.orientation.axes.iter().enumerate() {
            let n = src.dims[i];
            let rv = r[a.reference as usize];
            s[i] = if a.flipped { n - 1 - rv } else { rv };
        }
        v.get(s[0], s[1], s[2])
    });
    Ok(out)
}

/// Resamples onto a grid with `new_spacing` covering the same physical
/// extent (`round(n·s/s')` voxels per axis, same origin). Samples past the
/// last source voxel are clamped to the edge.
pub fn resample<T: Voxel>(v: &Grid<T>, new_spacing: [f64; 3], interp: Interp) -> Result<Grid<T>> {
    if new_spacing.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "resample spacing must be positive, got {new_spacing:?}"
        )));
    }
    if interp == Interp::Trilinear && !T::CONTINUOUS {
        return Err(Error::InterpolationNotSupported);
    }
    let src = *v.geometry();
    if src.spacing == new_spacing {
        return Ok(v.clone());
    }
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = ((src.dims[a] as f64 * src.spacing[a] / new_spacing[a]).round() as usize).max(1);
    }
    let geom = Geometry {
        dims,
        spacing: new_spacing,
        ..src
    };
    let scale = [
        new_spacing[0] / src.spacing[0],
        new_spacing[1] / src.spacing[1],
        new_spacing[2] / src.spacing[2],
    ];
    let hi = [
        (src.dims[0] - 1) as f64,
        (src.dims[1] - 1) as f64,
        (src.dims[2] - 1) as f64,
    ];
    let sdata = v.data();
    let values = if T::CONTINUOUS && interp == Interp::Trilinear {
        let f: Vec<f64> = sdata.iter().map(|x| x.to_f64()).collect();
        Some(f)
    } else {
        None
    };
    Ok(Grid::from_fn(geom, |x, y, z| {
        let idx = [
            (x as f64 * scale[0]).min(hi[0]),
            (y as f64 * scale[1]).min(hi[1]),
            (z as f64 * scale[2]).min(hi[2]),
        ];
        match &values {
            Some(f) => T::from_f64(sample_trilinear(f, src.dims, idx).expect("clamped")),
            None => sdata[nearest_index(src.dims, idx).expect("clamped")],
        }
    }))
}

/// Extracts the inclusive box `lo..=hi` (voxel indices).
pub fn extract<T: Voxel>(v: &Grid<T>, lo: [usize; 3], hi: [usize; 3]) -> Grid<T> {
    let g = v.geometry();
    let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let geom = Geometry {
        dims,
        origin: g.to_physical([lo[0] as f64, lo[1] as f64, lo[2] as f64]),
        ..*g
    };
    Grid::from_fn(geom, |x, y, z| v.get(x + lo[0], y + lo[1], z + lo[2]))
}

/// Writes `patch` back into `into` at `offset` (inverse of a crop).
pub fn paste<T: Voxel>(into: &mut Grid<T>, patch: &Grid<T>, offset: [usize; 3]) {
    let [px, py, pz] = patch.dims();
    for z in 0..pz {
        for y in 0..py {
            for x in 0..px {
                into.set(x + offset[0], y + offset[1], z + offset[2], patch.get(x, y, z));
            }
        }
    }
}

/// Tight bounding box of `m`, dilated by `margin` voxels and clamped to the
/// volume.
pub fn bbox_with_margin(m: &Mask3, margin: usize) -> Result<([usize; 3], [usize; 3])> {
    let (lo, hi) = m.bbox().ok_or(Error::EmptyMask)?;
    let dims = m.dims();
    let mut l = [0; 3];
    let mut h = [0; 3];
    for a in 0..3 {
        l[a] = lo[a].saturating_sub(margin);
        h[a] = (hi[a] + margin).min(dims[a] - 1);
    }
    Ok((l, h))
}

/// Crops `v` to the mask's bounding box plus `margin`; returns the crop and
/// its voxel offset in `v`.
pub fn crop_to_bbox<T: Voxel>(v: &Grid<T>, m: &Mask3, margin: usize) -> Result<(Grid<T>, [usize; 3])> {
    v.geometry().ensure_matches(m.geometry(), "crop_to_bbox")?;
    let (lo, hi) = bbox_with_margin(m, margin)?;
    Ok((extract(v, lo, hi), lo))
}

/// Linear map of `[min, max]` onto `[lo, hi]`; a constant image maps to the
/// midpoint.
pub fn rescale_intensity(v: &Volume3, lo: f64, hi: f64) -> Volume3 {
    let (min, max) = v.min_max();
    if !(max > min) {
        return v.map(|_| 0.5 * (lo + hi));
    }
    let (a, b) = (lo.min(hi), lo.max(hi));
    let scale = (hi - lo) / (max - min);
    v.map(|x| (lo + (x - min) * scale).clamp(a, b))
}

/// Zero mean, unit population standard deviation; zero-variance input maps
/// to all zeros.
pub fn zscore_normalize(v: &Volume3) -> Volume3 {
    let n = v.len() as f64;
    let mean = v.mean();
    let var = v.data().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) {
        return v.map(|_| 0.0);
    }
    v.map(|x| (x - mean) / std)
}
