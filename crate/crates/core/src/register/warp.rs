//! Resampling an image through a rigid transform or displacement field.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{nearest_index, sample_trilinear};
use crate::preprocess::Interp;
use crate::register::transform::{apply_with, DisplacementField, RigidTransform};
use crate::volume::{Geometry, Grid, Voxel};

/// Spatial mapping from reference-grid points into the source image.
#[derive(Clone, Copy, Debug)]
pub enum Transform<'a> {
    Rigid(&'a RigidTransform),
    Field(&'a DisplacementField),
}

impl<'a> From<&'a RigidTransform> for Transform<'a> {
    fn from(t: &'a RigidTransform) -> Self {
        Transform::Rigid(t)
    }
}

impl<'a> From<&'a DisplacementField> for Transform<'a> {
    fn from(f: &'a DisplacementField) -> Self {
        Transform::Field(f)
    }
}

/// Warps `v` onto its own grid (rigid) or onto the field's grid (field,
/// which must have the same dims as `v`). Samples falling outside `v`
/// take the zero value of `T`.
pub fn warp<'a, T: Voxel>(v: &Grid<T>, t: impl Into<Transform<'a>>, interp: Interp) -> Result<Grid<T>> {
    let t = t.into();
    let reference = match t {
        Transform::Rigid(_) => *v.geometry(),
        Transform::Field(f) => {
            v.geometry().ensure_same_dims(f.geometry(), "warp")?;
            *f.geometry()
        }
    };
    warp_onto(v, &reference, t, interp)
}

/// Warps `v` onto an arbitrary reference grid.
pub fn warp_onto<T: Voxel>(v: &Grid<T>, reference: &Geometry, t: Transform<'_>, interp: Interp) -> Result<Grid<T>> {
    if interp == Interp::Trilinear && !T::CONTINUOUS {
        return Err(Error::InterpolationNotSupported);
    }
    if let Transform::Field(f) = t {
        if f.geometry().dims != reference.dims {
            return Err(Error::GeometryMismatch("field dims differ from reference grid".into()));
        }
    }
    let src = *v.geometry();
    if src.orientation != reference.orientation {
        return Err(Error::GeometryMismatch("orientation codes differ".into()));
    }
    let values: Option<Vec<f64>> =
        (interp == Interp::Trilinear).then(|| v.data().iter().map(|x| x.to_f64()).collect());
    let rot = match t {
        Transform::Rigid(r) => Some(r.matrix()),
        Transform::Field(_) => None,
    };
    let [nx, ny, _] = reference.dims;
    let mut out = vec![T::default(); reference.len()];
    out.par_chunks_mut(nx * ny).enumerate().for_each(|(z, plane)| {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                let p = reference.to_physical([x as f64, y as f64, z as f64]);
                let q = match t {
                    Transform::Rigid(r) => apply_with(rot.as_ref().expect("rigid"), r, p),
                    Transform::Field(f) => {
                        let d = f.data()[i];
                        [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
                    }
                };
                let idx = src.to_index(q);
                plane[x + nx * y] = match &values {
                    Some(vals) => sample_trilinear(vals, src.dims, idx).map(T::from_f64).unwrap_or_default(),
                    None => nearest_index(src.dims, idx).map(|j| v.data()[j]).unwrap_or_default(),
                };
            }
        }
    });
    Ok(Grid::from_parts(*reference, out))
}
