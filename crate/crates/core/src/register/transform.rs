//! Rigid transforms and dense displacement fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nrrd::{self, ScalarType};
use crate::volume::Geometry;

pub type Mat3 = [[f64; 3]; 3];

/// Rotation about `center` by Euler angles (applied x, then y, then z),
/// followed by `translation`: `p ↦ R(p − c) + c + t`, all in mm.
///
/// Maps points of the fixed (reference) grid into the moving image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub angles: [f64; 3],
    pub translation: [f64; 3],
    pub center: [f64; 3],
}

impl RigidTransform {
    pub fn identity(center: [f64; 3]) -> Self {
        RigidTransform {
            angles: [0.0; 3],
            translation: [0.0; 3],
            center,
        }
    }

    pub fn translation(t: [f64; 3], center: [f64; 3]) -> Self {
        RigidTransform {
            angles: [0.0; 3],
            translation: t,
            center,
        }
    }

    pub fn matrix(&self) -> Mat3 {
        let [ax, ay, az] = self.angles;
        let (sx, cx) = ax.sin_cos();
        let (sy, cy) = ay.sin_cos();
        let (sz, cz) = az.sin_cos();
        // Rz · Ry · Rx
        [
            [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
            [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
            [-sy, cy * sx, cy * cx],
        ]
    }

    /// Euler angles of a rotation matrix built as `Rz · Ry · Rx`.
    pub fn angles_from_matrix(r: &Mat3) -> [f64; 3] {
        let ay = (-r[2][0]).clamp(-1.0, 1.0).asin();
        if r[2][0].abs() < 1.0 - 1e-12 {
            [r[2][1].atan2(r[2][2]), ay, r[1][0].atan2(r[0][0])]
        } else {
            // gimbal lock: fold the x rotation into z
            [0.0, ay, (-r[0][1]).atan2(r[1][1])]
        }
    }

    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.matrix();
        apply_with(&r, self, p)
    }

    pub fn inverse(&self) -> Self {
        let r = self.matrix();
        let rt = transpose(&r);
        let t = mat_vec(&rt, self.translation);
        RigidTransform {
            angles: Self::angles_from_matrix(&rt),
            translation: [-t[0], -t[1], -t[2]],
            center: self.center,
        }
    }

    /// `self ∘ other`: applies `other` first. Keeps `other`'s centre.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        let ra = self.matrix();
        let rb = other.matrix();
        let r = mat_mul(&ra, &rb);
        let c = other.center;
        let inner = [
            c[0] + other.translation[0] - self.center[0],
            c[1] + other.translation[1] - self.center[1],
            c[2] + other.translation[2] - self.center[2],
        ];
        let rot = mat_vec(&ra, inner);
        RigidTransform {
            angles: Self::angles_from_matrix(&r),
            translation: [
                rot[0] + self.center[0] + self.translation[0] - c[0],
                rot[1] + self.center[1] + self.translation[1] - c[1],
                rot[2] + self.center[2] + self.translation[2] - c[2],
            ],
            center: c,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.angles
            .iter()
            .chain(&self.translation)
            .chain(&self.center)
            .all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: RigidTransform = serde_json::from_str(&s)?;
        if !t.is_finite() {
            return Err(Error::NonFinite("rigid transform parameters".into()));
        }
        Ok(t)
    }
}

#[inline]
pub(crate) fn apply_with(r: &Mat3, t: &RigidTransform, p: [f64; 3]) -> [f64; 3] {
    let d = [p[0] - t.center[0], p[1] - t.center[1], p[2] - t.center[2]];
    let q = mat_vec(r, d);
    [
        q[0] + t.center[0] + t.translation[0],
        q[1] + t.center[1] + t.translation[1],
        q[2] + t.center[2] + t.translation[2],
    ]
}

fn transpose(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

#[inline]
fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Per-voxel displacement in mm on a reference grid: voxel `i` at physical
/// position `p` samples the moving image at `p + d[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    geom: Geometry,
    data: Vec<[f64; 3]>,
}

impl DisplacementField {
    pub fn zeros(geom: Geometry) -> Self {
        DisplacementField {
            geom,
            data: vec![[0.0; 3]; geom.len()],
        }
    }

    pub fn new(geom: Geometry, data: Vec<[f64; 3]>) -> Result<Self> {
        geom.validate()?;
        if data.len() != geom.len() {
            return Err(Error::InvalidGeometry("field length does not match dims".into()));
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("displacement field".into()));
        }
        Ok(DisplacementField { geom, data })
    }

    /// Builds a field from a function of voxel index returning mm.
    pub fn from_fn(geom: Geometry, mut f: impl FnMut(usize, usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(geom.len());
        for z in 0..geom.dims[2] {
            for y in 0..geom.dims[1] {
                for x in 0..geom.dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        DisplacementField { geom, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn data(&self) -> &[[f64; 3]] {
        &self.data
    }

    /// Displacement of voxel `i` in voxel units.
    #[inline]
    pub fn voxels(&self, i: usize) -> [f64; 3] {
        let d = self.data[i];
        let s = self.geom.spacing;
        [d[0] / s[0], d[1] / s[1], d[2] / s[2]]
    }

    pub fn mean_magnitude_voxels(&self) -> f64 {
        (0..self.data.len()).map(|i| norm(self.voxels(i))).sum::<f64>() / self.data.len() as f64
    }

    pub fn max_magnitude_voxels(&self) -> f64 {
        (0..self.data.len()).map(|i| norm(self.voxels(i))).fold(0.0, f64::max)
    }

    /// Mean `|self − other|` in voxels.
    pub fn mean_endpoint_error_voxels(&self, other: &DisplacementField) -> Result<f64> {
        self.geom.ensure_same_dims(&other.geom, "endpoint error")?;
        let n = self.data.len();
        Ok((0..n)
            .map(|i| {
                let a = self.voxels(i);
                let b = other.voxels(i);
                norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
            })
            .sum::<f64>()
            / n as f64)
    }

    /// 4-D NRRD with a leading 3-vector axis.
    pub fn save_nrrd(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header = nrrd::spatial_header(&self.geom, ScalarType::F64);
        header.sizes.insert(0, 3);
        header.spacings.insert(0, f64::NAN);
        if let Some(m) = header.axis_mins.as_mut() {
            m.insert(0, f64::NAN);
        }
        header.kinds = Some(vec!["vector".into(), "domain".into(), "domain".into(), "domain".into()]);
        let mut payload = Vec::with_capacity(self.data.len() * 24);
        for v in &self.data {
            for c in v {
                payload.extend_from_slice(&c.to_le_bytes());
            }
        }
        nrrd::write_raw(path.as_ref(), &header, &payload)
    }

    pub fn load_nrrd(path: impl AsRef<Path>) -> Result<Self> {
        let (header, values) = nrrd::read_raw(path.as_ref())?;
        if header.dimension() != 4 {
            return Err(Error::UnsupportedDimension {
                found: header.dimension(),
                expected: 4,
            });
        }
        if header.sizes[0] != 3 {
            return Err(Error::MalformedHeader("displacement field needs 3 components".into()));
        }
        let geom = nrrd::geometry_from_header(&header, 1)?;
        let data = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        DisplacementField::new(geom, data)
    }
}

#[inline]
pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() <= tol)
    }

    #[test]
    fn rotation_about_z_moves_points_counterclockwise() {
        let t = RigidTransform {
            angles: [0.0, 0.0, std::f64::consts::FRAC_PI_2],
            translation: [0.0; 3],
            center: [1.0, 1.0, 0.0],
        };
        assert!(close(t.apply([2.0, 1.0, 5.0]), [1.0, 2.0, 5.0], 1e-12));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = RigidTransform {
            angles: [0.1, -0.2, 0.3],
            translation: [1.5, -2.0, 0.25],
            center: [10.0, 20.0, 30.0],
        };
        let p = dir.path().join("t.json");
        t.save_json(&p).unwrap();
        assert_eq!(RigidTransform::load_json(&p).unwrap(), t);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert!(v.get("angles").is_some() && v.get("translation").is_some() && v.get("center").is_some());
    }

    #[test]
    fn field_nrrd_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::new([3, 4, 2], [1.0, 2.0, 3.0]).unwrap().with_origin([1.0, -1.0, 0.5]);
        let f = DisplacementField::from_fn(g, |x, y, z| [x as f64 * 0.5, -(y as f64), z as f64 + 0.125]);
        let p = dir.path().join("f.nrrd");
        f.save_nrrd(&p).unwrap();
        assert_eq!(DisplacementField::load_nrrd(&p).unwrap(), f);
        assert!(crate::nrrd::load_nrrd::<f64>(&p).is_err());
    }

    proptest! {
        #[test]
        fn inverse_composes_to_identity(
            ax in -0.6f64..0.6, ay in -0.6f64..0.6, az in -0.6f64..0.6,
            tx in -20f64..20.0, ty in -20f64..20.0, tz in -20f64..20.0,
            cx in -5f64..5.0,
        ) {
            let t = RigidTransform { angles: [ax, ay, az], translation: [tx, ty, tz], center: [cx, 2.0 * cx, 1.0] };
            let id = t.inverse().compose(&t);
            for v in id.angles.iter().chain(&id.translation) {
                prop_assert!(v.abs() < 1e-9, "{:?}", id);
            }
            let p = [3.0, -4.0, 7.5];
            prop_assert!(close(t.inverse().apply(t.apply(p)), p, 1e-9));
        }

        #[test]
        fn compose_matches_sequential_application(
            a in proptest::array::uniform3(-0.5f64..0.5),
            b in proptest::array::uniform3(-0.5f64..0.5),
            ta in proptest::array::uniform3(-10f64..10.0),
            tb in proptest::array::uniform3(-10f64..10.0),
        ) {
            let ra = RigidTransform { angles: a, translation: ta, center: [1.0, 2.0, 3.0] };
            let rb = RigidTransform { angles: b, translation: tb, center: [-4.0, 0.0, 2.0] };
            let p = [5.0, -1.0, 2.0];
            prop_assert!(close(ra.compose(&rb).apply(p), ra.apply(rb.apply(p)), 1e-9));
        }
    }
}
