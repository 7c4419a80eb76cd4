//! Per-segment aggregation and bull's-eye rendering.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AhaAtlas, SEGMENT_COUNT, SEGMENT_NAMES};
use crate::error::{Error, Result};
use crate::volume::Mask3;

/// Foreground voxel counts per segment plus those on label 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentCounts {
    pub per_segment: [u64; SEGMENT_COUNT],
    pub outside: u64,
}

impl SegmentCounts {
    pub fn total(&self) -> u64 {
        self.per_segment.iter().sum::<u64>() + self.outside
    }
}

pub fn segment_counts(scar: &Mask3, atlas: &AhaAtlas) -> Result<SegmentCounts> {
    scar.geometry().ensure_matches(atlas.labels().geometry(), "segment_counts")?;
    let mut counts = SegmentCounts {
        per_segment: [0; SEGMENT_COUNT],
        outside: 0,
    };
    for (&s, &l) in scar.data().iter().zip(atlas.labels().data()) {
        if s {
            match l {
                0 => counts.outside += 1,
                l => counts.per_segment[l as usize - 1] += 1,
            }
        }
    }
    Ok(counts)
}

/// Scar volume in mL per segment.
pub fn segment_volumes(scar: &Mask3, atlas: &AhaAtlas) -> Result<BullseyeTable> {
    let counts = segment_counts(scar, atlas)?;
    let ml = scar.geometry().voxel_volume_mm3() / 1000.0;
    let values = counts.per_segment.map(|c| c as f64 * ml);
    Ok(BullseyeTable::new(values, counts.outside as f64 * ml))
}

/// One scalar per AHA segment. `total` is the sum of the 17 entries;
/// `outside` holds whatever fell on unlabelled voxels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BullseyeTable {
    pub values: [f64; SEGMENT_COUNT],
    pub outside: f64,
    pub total: f64,
}

impl BullseyeTable {
    pub fn new(values: [f64; SEGMENT_COUNT], outside: f64) -> Self {
        BullseyeTable {
            values,
            outside,
            total: values.iter().sum(),
        }
    }

    pub fn zeros() -> Self {
        BullseyeTable::new([0.0; SEGMENT_COUNT], 0.0)
    }

    pub fn get(&self, segment: u8) -> Result<f64> {
        super::Ring::of(segment)?;
        Ok(self.values[segment as usize - 1])
    }

    /// Entry-wise `self − other`.
    pub fn difference(&self, other: &BullseyeTable) -> BullseyeTable {
        let values = std::array::from_fn(|i| self.values[i] - other.values[i]);
        BullseyeTable::new(values, self.outside - other.outside)
    }

    /// Entry-wise mean of several tables; `None` for an empty slice.
    pub fn mean(tables: &[BullseyeTable]) -> Option<BullseyeTable> {
        if tables.is_empty() {
            return None;
        }
        let n = tables.len() as f64;
        let values = std::array::from_fn(|i| tables.iter().map(|t| t.values[i]).sum::<f64>() / n);
        let outside = tables.iter().map(|t| t.outside).sum::<f64>() / n;
        Some(BullseyeTable::new(values, outside))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment_id,name,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, SEGMENT_NAMES[i], v);
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

const SIZE: f64 = 400.0;
const CENTER: f64 = SIZE / 2.0;
/// Ring radii from the apex disk outwards.
const RADII: [f64; 4] = [40.0, 85.0, 130.0, 175.0];

fn polar(r: f64, theta: f64) -> (f64, f64) {
    (CENTER + r * theta.cos(), CENTER - r * theta.sin())
}

fn annular_sector(r_in: f64, r_out: f64, t0: f64, t1: f64) -> String {
    let (ax, ay) = polar(r_out, t0);
    let (bx, by) = polar(r_out, t1);
    let (cx, cy) = polar(r_in, t1);
    let (dx, dy) = polar(r_in, t0);
    let large = if t1 - t0 > PI { 1 } else { 0 };
    format!(
        "M{ax:.3},{ay:.3} A{r_out:.3},{r_out:.3} 0 {large} 0 {bx:.3},{by:.3} \
         L{cx:.3},{cy:.3} A{r_in:.3},{r_in:.3} 0 {large} 1 {dx:.3},{dy:.3} Z"
    )
}

fn fill(value: f64, scale: f64) -> String {
    if scale <= 0.0 || value == 0.0 {
        return "#ffffff".into();
    }
    let f = (value.abs() / scale).clamp(0.0, 1.0);
    let fade = (255.0 * (1.0 - 0.85 * f)).round() as u8;
    if value > 0.0 {
        format!("#ff{fade:02x}{fade:02x}")
    } else {
        format!("#{fade:02x}{fade:02x}ff")
    }
}

fn label(value: f64) -> String {
    let s = format!("{value:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Renders a bull's-eye plot: basal ring outermost, then mid and apical,
/// with the apex as the central disk. Segment 1 (anterior) sits at the top
/// and numbering runs counter-clockwise. Positive values shade red and
/// negative values blue.
pub fn render_bullseye_svg(table: &BullseyeTable, title: Option<&str>) -> String {
    let scale = table.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{}\" viewBox=\"0 0 {SIZE} {}\">",
        SIZE + 30.0,
        SIZE + 30.0
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");
    let cell = |svg: &mut String, seg: usize, path: String, tx: f64, ty: f64| {
        let v = table.values[seg - 1];
        let _ = writeln!(
            svg,
            "<g id=\"segment-{seg}\"><title>{}</title><path d=\"{path}\" fill=\"{}\" stroke=\"#000000\" stroke-width=\"1\"/>\
             <text x=\"{tx:.3}\" y=\"{ty:.3}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" dominant-baseline=\"middle\">{}</text></g>",
            SEGMENT_NAMES[seg - 1],
            fill(v, scale),
            label(v)
        );
    };
    // Rings: (first segment, sector count, angular offset of sector 0, inner, outer radius).
    let rings = [
        (1usize, 6usize, PI / 3.0, RADII[2], RADII[3]),
        (7, 6, PI / 3.0, RADII[1], RADII[2]),
        (13, 4, PI / 3.0 - PI / 6.0, RADII[0], RADII[1]),
    ];
    for (first, n, offset, r_in, r_out) in rings {
        let w = 2.0 * PI / n as f64;
        for k in 0..n {
            let t0 = offset + k as f64 * w;
            let t1 = t0 + w;
            let (tx, ty) = polar(0.5 * (r_in + r_out), 0.5 * (t0 + t1));
            cell(&mut svg, first + k, annular_sector(r_in, r_out, t0, t1), tx, ty);
        }
    }
    let r = RADII[0];
    let apex = format!(
        "M{:.3},{CENTER:.3} A{r:.3},{r:.3} 0 1 0 {:.3},{CENTER:.3} A{r:.3},{r:.3} 0 1 0 {:.3},{CENTER:.3} Z",
        CENTER - r,
        CENTER + r,
        CENTER - r
    );
    cell(&mut svg, 17, apex, CENTER, CENTER);
    if let Some(t) = title {
        let escaped = t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            svg,
            "<text x=\"{CENTER}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{escaped}</text>",
            SIZE + 18.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn bullseye_svg(table: &BullseyeTable, path: impl AsRef<Path>, title: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_bullseye_svg(table, title)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::load_atlas;
    use crate::volume::{Geometry, LabelVolume};

    /// 17 slabs of 500 voxels each along z, voxel volume 2 mm³.
    fn slab_atlas() -> AhaAtlas {
        let g = Geometry::new([10, 50, 18], [1.0, 1.0, 2.0]).unwrap();
        load_atlas(LabelVolume::from_fn(g, |_, _, z| z as u16)).unwrap()
    }

    #[test]
    fn whole_segment_volume() {
        let atlas = slab_atlas();
        let scar = atlas.segment_mask(8);
        let t = segment_volumes(&scar, &atlas).unwrap();
        for s in 1..=17u8 {
            let expected = if s == 8 { 1.0 } else { 0.0 };
            assert!((t.get(s).unwrap() - expected).abs() < 1e-12);
        }
        assert!((t.total - 1.0).abs() < 1e-12);
        assert!(render_bullseye_svg(&t, None).contains(">1.00<"));
    }

    #[test]
    fn conservation_with_outside_voxels() {
        let atlas = slab_atlas();
        let scar = atlas.labels().map(|l| l == 0 || l == 7 || l == 13);
        let c = segment_counts(&scar, &atlas).unwrap();
        assert_eq!(c.per_segment[6], c.per_segment[12]);
        assert_eq!(c.total() as usize, scar.count());
        assert_eq!(c.outside, 500);
        let t = segment_volumes(&scar, &atlas).unwrap();
        assert!((t.total - t.values.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let atlas = slab_atlas();
        let scar = Mask3::filled(Geometry::new([2, 2, 2], [1.0; 3]).unwrap(), false);
        assert!(matches!(segment_volumes(&scar, &atlas), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn zero_table_svg_has_seventeen_zero_cells_and_is_deterministic() {
        let t = BullseyeTable::zeros();
        let a = render_bullseye_svg(&t, Some("scar volume"));
        assert_eq!(a.matches(">0.00<").count(), 17);
        assert_eq!(a, render_bullseye_svg(&t, Some("scar volume")));
        assert_eq!(a.matches("<path").count(), 17);
    }

    #[test]
    fn csv_lists_every_segment() {
        let t = BullseyeTable::zeros();
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 18);
        assert!(csv.contains("17,apex,0\n"));
    }
}
