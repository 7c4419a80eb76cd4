//! Voxel grids with physical geometry.
//!
//! Data is stored x-fastest: `index = x + nx * (y + ny * z)`. Physical
//! position of a voxel centre is `origin + index * spacing` in the stored
//! axis frame; [`Orientation`] records how stored axes relate to the
//! reference frame and is only changed by [`crate::preprocess::reorient`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element type of a voxel grid.
pub trait Voxel: Copy + Default + PartialEq + Send + Sync + fmt::Debug + 'static {
    /// Whether trilinear interpolation is meaningful for this type.
    const CONTINUOUS: bool;
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
    fn is_valid(self) -> bool {
        true
    }
}

impl Voxel for f64 {
    const CONTINUOUS: bool = true;
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn is_valid(self) -> bool {
        self.is_finite()
    }
}

impl Voxel for bool {
    const CONTINUOUS: bool = false;
    fn to_f64(self) -> f64 {
        if self {
            1.0
        } else {
            0.0
        }
    }
    fn from_f64(v: f64) -> Self {
        v >= 0.5
    }
}

impl Voxel for u16 {
    const CONTINUOUS: bool = false;
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, u16::MAX as f64) as u16
    }
}

/// One stored axis: which reference axis it runs along and whether it is
/// reversed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AxisCode {
    pub reference: u8,
    pub flipped: bool,
}

/// Permutation + flip code, written as e.g. `+x+y+z` or `-y+x+z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Orientation {
    pub axes: [AxisCode; 3],
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation {
        axes: [
            AxisCode { reference: 0, flipped: false },
            AxisCode { reference: 1, flipped: false },
            AxisCode { reference: 2, flipped: false },
        ],
    };

    pub fn new(axes: [AxisCode; 3]) -> Result<Self> {
        let o = Orientation { axes };
        let mut seen = [false; 3];
        for a in &axes {
            let r = a.reference as usize;
            if r > 2 || seen[r] {
                return Err(Error::InvalidOrientation(o.to_string()));
            }
            seen[r] = true;
        }
        Ok(o)
    }

    /// Stored axis that runs along reference axis `r`.
    pub fn stored_axis_of(&self, r: usize) -> usize {
        self.axes
            .iter()
            .position(|a| a.reference as usize == r)
            .expect("orientation is a permutation")
    }
}

impl Default for Orientation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.axes {
            let sign = if a.flipped { '-' } else { '+' };
            let name = ['x', 'y', 'z'][a.reference as usize % 3];
            write!(f, "{sign}{name}")?;
        }
        Ok(())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidOrientation(s.to_string());
        let chars: Vec<char> = s.trim().chars().collect();
        if chars.len() != 6 {
            return Err(bad());
        }
        let mut axes = [AxisCode { reference: 0, flipped: false }; 3];
        for (i, pair) in chars.chunks(2).enumerate() {
            let flipped = match pair[0] {
                '+' => false,
                '-' => true,
                _ => return Err(bad()),
            };
            let reference = match pair[1].to_ascii_lowercase() {
                'x' => 0,
                'y' => 1,
                'z' => 2,
                _ => return Err(bad()),
            };
            axes[i] = AxisCode { reference, flipped };
        }
        Orientation::new(axes).map_err(|_| bad())
    }
}

impl Serialize for Orientation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Orientation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Grid shape and its placement in millimetres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    #[serde(default)]
    pub orientation: Orientation,
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let g = Geometry {
            dims,
            spacing,
            origin: [0.0; 3],
            orientation: Orientation::IDENTITY,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_origin(mut self, origin: [f64; 3]) -> Self {
        self.origin = origin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidGeometry(format!("zero dimension in {:?}", self.dims)));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "spacings must be positive, got {:?}",
                self.spacing
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite origin".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    /// Index of `(x, y, z)` when each coordinate may be out of range.
    #[inline]
    pub fn checked_index(&self, p: [i64; 3]) -> Option<usize> {
        for a in 0..3 {
            if p[a] < 0 || p[a] >= self.dims[a] as i64 {
                return None;
            }
        }
        Some(self.index(p[0] as usize, p[1] as usize, p[2] as usize))
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Physical position (mm) of a continuous voxel index.
    #[inline]
    pub fn to_physical(&self, idx: [f64; 3]) -> [f64; 3] {
        [
            self.origin[0] + idx[0] * self.spacing[0],
            self.origin[1] + idx[1] * self.spacing[1],
            self.origin[2] + idx[2] * self.spacing[2],
        ]
    }

    /// Continuous voxel index of a physical position.
    #[inline]
    pub fn to_index(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    /// Physical centre of the grid.
    pub fn center(&self) -> [f64; 3] {
        self.to_physical([
            (self.dims[0] - 1) as f64 / 2.0,
            (self.dims[1] - 1) as f64 / 2.0,
            (self.dims[2] - 1) as f64 / 2.0,
        ])
    }

    /// Same dims, orientation and (to 1e-9 relative) spacing/origin.
    pub fn matches(&self, other: &Geometry) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        self.dims == other.dims
            && self.orientation == other.orientation
            && (0..3).all(|a| close(self.spacing[a], other.spacing[a]))
            && (0..3).all(|a| close(self.origin[a], other.origin[a]))
    }

    pub fn ensure_matches(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: {:?}@{:?} vs {:?}@{:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }

    pub fn ensure_same_dims(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.dims == other.dims {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: dims {:?} vs {:?}",
                self.dims, other.dims
            )))
        }
    }
}

/// A scalar field on a [`Geometry`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    geom: Geometry,
    data: Vec<T>,
}

/// Intensity image.
pub type Volume3 = Grid<f64>;
/// Binary voxel mask.
pub type Mask3 = Grid<bool>;
/// Integer label image; 0 is background.
pub type LabelVolume = Grid<u16>;

impl<T: Voxel> Grid<T> {
    pub fn new(geom: Geometry, data: Vec<T>) -> Result<Self> {
        geom.validate()?;
        if data.len() != geom.len() {
            return Err(Error::InvalidGeometry(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geom.dims
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_valid()) {
            return Err(Error::NonFinite(format!("voxel {:?}", geom.coords(i))));
        }
        Ok(Grid { geom, data })
    }

    pub fn filled(geom: Geometry, value: T) -> Self {
        let n = geom.len();
        Grid { geom, data: vec![value; n] }
    }

    pub fn from_fn(geom: Geometry, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(geom.len());
        for z in 0..geom.dims[2] {
            for y in 0..geom.dims[1] {
                for x in 0..geom.dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Grid { geom, data }
    }

    /// Builds a grid whose data is already known to satisfy the invariants.
    pub(crate) fn from_parts(geom: Geometry, data: Vec<T>) -> Self {
        debug_assert_eq!(geom.len(), data.len());
        Grid { geom, data }
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn with_geometry(mut self, geom: Geometry) -> Result<Self> {
        geom.validate()?;
        if geom.dims != self.geom.dims {
            return Err(Error::GeometryMismatch("dims differ".into()));
        }
        self.geom = geom;
        Ok(self)
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.geom.spacing
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.geom.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: T) {
        let i = self.geom.index(x, y, z);
        self.data[i] = v;
    }

    pub fn map<U: Voxel>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            geom: self.geom,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<U: Voxel, V: Voxel>(&self, other: &Grid<U>, f: impl Fn(T, U) -> V) -> Result<Grid<V>> {
        self.geom.ensure_same_dims(&other.geom, "zip_map")?;
        Ok(Grid {
            geom: self.geom,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

impl Grid<f64> {
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_all_background(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Inclusive `[min, max]` corners of the foreground, or `None` if empty.
    pub fn bbox(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, &b) in self.data.iter().enumerate() {
            if b {
                any = true;
                let c = self.geom.coords(i);
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a]);
                }
            }
        }
        any.then_some((lo, hi))
    }

    pub fn and(&self, other: &Mask3) -> Result<Mask3> {
        self.zip_map(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask3) -> Result<Mask3> {
        self.zip_map(other, |a, b| a || b)
    }

    pub fn not(&self) -> Mask3 {
        self.map(|a| !a)
    }

    /// Foreground centroid in voxel index units.
    pub fn centroid(&self) -> Option<[f64; 3]> {
        let mut sum = [0.0f64; 3];
        let mut n = 0usize;
        for (i, &b) in self.data.iter().enumerate() {
            if b {
                let c = self.geom.coords(i);
                for a in 0..3 {
                    sum[a] += c[a] as f64;
                }
                n += 1;
            }
        }
        (n > 0).then(|| [sum[0] / n as f64, sum[1] / n as f64, sum[2] / n as f64])
    }
}
