//! Single-file NRRD reading and writing (raw, little-endian payload).
//!
//! The writer emits a fixed field order so identical grids produce
//! byte-identical files. Origin is carried in `axis mins`, the stored-axis
//! orientation code in the `orientation:=` key/value pair.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Geometry, Grid, Orientation, Voxel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    pub fn parse(s: &str) -> Result<Self> {
        use ScalarType::*;
        Ok(match s.trim() {
            "signed char" | "int8" | "int8_t" => I8,
            "uchar" | "unsigned char" | "uint8" | "uint8_t" => U8,
            "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => I16,
            "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => U16,
            "int" | "signed int" | "int32" | "int32_t" => I32,
            "uint" | "unsigned int" | "uint32" | "uint32_t" => U32,
            "float" => F32,
            "double" => F64,
            other => return Err(Error::Unsupported(format!("type {other:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        use ScalarType::*;
        match self {
            I8 => "int8",
            U8 => "uchar",
            I16 => "short",
            U16 => "ushort",
            I32 => "int",
            U32 => "uint",
            F32 => "float",
            F64 => "double",
        }
    }

    pub fn size(self) -> usize {
        use ScalarType::*;
        match self {
            I8 | U8 => 1,
            I16 | U16 => 2,
            I32 | U32 | F32 => 4,
            F64 => 8,
        }
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, ScalarType::F32 | ScalarType::F64)
    }

    fn decode(self, bytes: &[u8]) -> Vec<f64> {
        use ScalarType::*;
        let n = self.size();
        bytes
            .chunks_exact(n)
            .map(|c| match self {
                I8 => c[0] as i8 as f64,
                U8 => c[0] as f64,
                I16 => i16::from_le_bytes([c[0], c[1]]) as f64,
                U16 => u16::from_le_bytes([c[0], c[1]]) as f64,
                I32 => i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                U32 => u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                F32 => f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                F64 => f64::from_le_bytes(c.try_into().expect("chunk of 8")),
            })
            .collect()
    }
}

/// Voxel types with a fixed on-disk representation.
pub trait NrrdVoxel: Voxel {
    const SCALAR: ScalarType;
    fn write_le(self, out: &mut Vec<u8>);
    /// Converts a decoded payload value, rejecting values the type cannot hold.
    fn from_stored(v: f64, stored: ScalarType) -> Result<Self>;
}

impl NrrdVoxel for f64 {
    const SCALAR: ScalarType = ScalarType::F64;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn from_stored(v: f64, _: ScalarType) -> Result<Self> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("NRRD payload".into()))
        }
    }
}

impl NrrdVoxel for bool {
    const SCALAR: ScalarType = ScalarType::U8;
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self as u8);
    }
    fn from_stored(v: f64, _: ScalarType) -> Result<Self> {
        if v.is_finite() {
            Ok(v != 0.0)
        } else {
            Err(Error::NonFinite("NRRD mask payload".into()))
        }
    }
}

impl NrrdVoxel for u16 {
    const SCALAR: ScalarType = ScalarType::U16;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn from_stored(v: f64, stored: ScalarType) -> Result<Self> {
        if !stored.is_integer() && v.fract() != 0.0 {
            return Err(Error::Unsupported(format!("non-integer label {v}")));
        }
        if !(0.0..=u16::MAX as f64).contains(&v) {
            return Err(Error::Unsupported(format!("label {v} out of range")));
        }
        Ok(v as u16)
    }
}

/// Parsed header fields. Per-axis vectors have `dimension` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct NrrdHeader {
    pub scalar: ScalarType,
    pub sizes: Vec<usize>,
    pub spacings: Vec<f64>,
    pub axis_mins: Option<Vec<f64>>,
    pub kinds: Option<Vec<String>>,
    pub key_values: BTreeMap<String, String>,
}

impl NrrdHeader {
    pub fn dimension(&self) -> usize {
        self.sizes.len()
    }

    fn element_count(&self) -> usize {
        self.sizes.iter().product()
    }

    fn render(&self) -> String {
        let join_f = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
        let mut s = String::from("NRRD0004\n# NRRD format: http://teem.sourceforge.net/nrrd/format.html\n");
        s += &format!("type: {}\n", self.scalar.name());
        s += &format!("dimension: {}\n", self.dimension());
        s += &format!(
            "sizes: {}\n",
            self.sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
        );
        s += &format!("spacings: {}\n", join_f(&self.spacings));
        if let Some(mins) = &self.axis_mins {
            s += &format!("axis mins: {}\n", join_f(mins));
        }
        if let Some(kinds) = &self.kinds {
            s += &format!("kinds: {}\n", kinds.join(" "));
        }
        s += "encoding: raw\n";
        s += "endian: little\n";
        for (k, v) in &self.key_values {
            s += &format!("{k}:={v}\n");
        }
        s.push('\n');
        s
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        // `Display` for f64 is the shortest representation that round-trips.
        format!("{x}")
    }
}

fn parse_f64(tok: &str) -> Result<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "nan" => Ok(f64::NAN),
        t => t
            .parse::<f64>()
            .map_err(|_| Error::MalformedHeader(format!("bad number {tok:?}"))),
    }
}

/// Writes `header` followed by the raw payload.
pub fn write_raw(path: &Path, header: &NrrdHeader, payload: &[u8]) -> Result<()> {
    let expected = header.element_count() * header.scalar.size();
    if payload.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len(),
        });
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(header.render().as_bytes())
        .and_then(|_| f.write_all(payload))
        .map_err(|e| Error::io(path, e))
}

/// Reads a header and its payload decoded to f64.
pub fn read_raw(path: &Path) -> Result<(NrrdHeader, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, offset) = parse_header(&bytes)?;
    let payload = &bytes[offset..];
    let expected = header.element_count() * header.scalar.size();
    if payload.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len(),
        });
    }
    let values = header.scalar.decode(payload);
    Ok((header, values))
}

fn parse_header(bytes: &[u8]) -> Result<(NrrdHeader, usize)> {
    let mut lines = Vec::new();
    let mut pos = 0;
    let mut terminated = false;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|e| pos + e)
            .ok_or_else(|| Error::MalformedHeader("header not terminated by a blank line".into()))?;
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::MalformedHeader("non-text header line".into()))?
            .trim_end_matches('\r');
        pos = end + 1;
        if line.is_empty() {
            terminated = true;
            break;
        }
        lines.push(line.to_string());
    }
    if !terminated {
        return Err(Error::MalformedHeader("header not terminated by a blank line".into()));
    }
    let mut it = lines.into_iter();
    let magic = it
        .next()
        .ok_or_else(|| Error::MalformedHeader("empty file".into()))?;
    if !magic.starts_with("NRRD000") {
        return Err(Error::MalformedHeader(format!("bad magic {magic:?}")));
    }

    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut key_values = BTreeMap::new();
    for line in it {
        if line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once(":=") {
            key_values.insert(k.to_string(), v.to_string());
        } else if let Some((k, v)) = line.split_once(": ") {
            fields.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        } else {
            return Err(Error::MalformedHeader(format!("unparseable line {line:?}")));
        }
    }

    let get = |k: &str| {
        fields
            .get(k)
            .ok_or_else(|| Error::MalformedHeader(format!("missing field {k:?}")))
    };
    let scalar = ScalarType::parse(get("type")?)?;
    let dimension: usize = get("dimension")?
        .parse()
        .map_err(|_| Error::MalformedHeader("bad dimension".into()))?;
    let sizes = get("sizes")?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::MalformedHeader("bad sizes".into()))?;
    if sizes.len() != dimension || sizes.contains(&0) {
        return Err(Error::MalformedHeader(format!(
            "sizes {sizes:?} inconsistent with dimension {dimension}"
        )));
    }
    let spacings = get("spacings")?
        .split_whitespace()
        .map(parse_f64)
        .collect::<Result<Vec<_>>>()?;
    if spacings.len() != dimension {
        return Err(Error::MalformedHeader("spacings length differs from dimension".into()));
    }
    let axis_mins = match fields.get("axis mins") {
        Some(v) => {
            let m = v.split_whitespace().map(parse_f64).collect::<Result<Vec<_>>>()?;
            if m.len() != dimension {
                return Err(Error::MalformedHeader("axis mins length differs from dimension".into()));
            }
            Some(m)
        }
        None => None,
    };
    let kinds = fields
        .get("kinds")
        .map(|v| v.split_whitespace().map(str::to_string).collect::<Vec<_>>());
    let encoding = get("encoding")?;
    if encoding != "raw" {
        return Err(Error::Unsupported(format!("encoding {encoding:?}")));
    }
    if scalar.size() > 1 {
        let endian = get("endian")?;
        if endian != "little" {
            return Err(Error::Unsupported(format!("endian {endian:?}")));
        }
    }
    if fields.contains_key("data file") || fields.contains_key("datafile") {
        return Err(Error::Unsupported("detached data files".into()));
    }
    Ok((
        NrrdHeader {
            scalar,
            sizes,
            spacings,
            axis_mins,
            kinds,
            key_values,
        },
        pos,
    ))
}

/// Loads a 3-D grid. Any supported stored scalar type is accepted as long
/// as its values fit `T`.
pub fn load_nrrd<T: NrrdVoxel>(path: impl AsRef<Path>) -> Result<Grid<T>> {
    load_nrrd_with_meta(path).map(|(g, _)| g)
}

/// Like [`load_nrrd`], also returning the `key:=value` pairs.
pub fn load_nrrd_with_meta<T: NrrdVoxel>(
    path: impl AsRef<Path>,
) -> Result<(Grid<T>, BTreeMap<String, String>)> {
    let (header, values) = read_raw(path.as_ref())?;
    if header.dimension() != 3 {
        return Err(Error::UnsupportedDimension {
            found: header.dimension(),
            expected: 3,
        });
    }
    let geom = geometry_from_header(&header, 0)?;
    let data = values
        .into_iter()
        .map(|v| T::from_stored(v, header.scalar))
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(geom, data)?;
    Ok((grid, header.key_values))
}

/// Geometry from the spatial axes starting at `first` (skipping e.g. a
/// vector axis).
pub(crate) fn geometry_from_header(header: &NrrdHeader, first: usize) -> Result<Geometry> {
    let ax = |v: &[f64]| [v[first], v[first + 1], v[first + 2]];
    let spacing = ax(&header.spacings);
    if spacing.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::MalformedHeader(format!("non-positive spacings {spacing:?}")));
    }
    let origin = header.axis_mins.as_deref().map(ax).unwrap_or([0.0; 3]);
    let orientation = match header.key_values.get("orientation") {
        Some(code) => code.parse::<Orientation>()?,
        None => Orientation::IDENTITY,
    };
    let geom = Geometry {
        dims: [header.sizes[first], header.sizes[first + 1], header.sizes[first + 2]],
        spacing,
        origin,
        orientation,
    };
    geom.validate()?;
    Ok(geom)
}

pub(crate) fn spatial_header(geom: &Geometry, scalar: ScalarType) -> NrrdHeader {
    let mut key_values = BTreeMap::new();
    key_values.insert("orientation".to_string(), geom.orientation.to_string());
    NrrdHeader {
        scalar,
        sizes: geom.dims.to_vec(),
        spacings: geom.spacing.to_vec(),
        axis_mins: Some(geom.origin.to_vec()),
        kinds: None,
        key_values,
    }
}

pub fn save_nrrd<T: NrrdVoxel>(grid: &Grid<T>, path: impl AsRef<Path>) -> Result<()> {
    save_nrrd_with_meta(grid, path, &[])
}

/// Saves a grid with extra `key:=value` pairs (keys must not contain `:=`).
pub fn save_nrrd_with_meta<T: NrrdVoxel>(
    grid: &Grid<T>,
    path: impl AsRef<Path>,
    meta: &[(&str, String)],
) -> Result<()> {
    let mut header = spatial_header(grid.geometry(), T::SCALAR);
    for (k, v) in meta {
        if k.contains(":=") || k.contains('\n') || v.contains('\n') {
            return Err(Error::InvalidParameter(format!("bad NRRD key/value {k:?}")));
        }
        header.key_values.insert(k.to_string(), v.clone());
    }
    let mut payload = Vec::with_capacity(grid.len() * T::SCALAR.size());
    for &v in grid.data() {
        v.write_le(&mut payload);
    }
    write_raw(path.as_ref(), &header, &payload)
}
