//! AHA 17-segment model of the left-ventricular myocardium.
//!
//! Segments 1-6 are basal, 7-12 mid-cavity, 13-16 apical and 17 the apex.

mod bullseye;
mod partition;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use bullseye::{bullseye_svg, render_bullseye_svg, segment_counts, segment_volumes, BullseyeTable, SegmentCounts};
pub use partition::{analytic_partition, RingSplits};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Mask3};

pub const SEGMENT_COUNT: usize = 17;

pub const SEGMENT_NAMES: [&str; SEGMENT_COUNT] = [
    "basal anterior",
    "basal anteroseptal",
    "basal inferoseptal",
    "basal inferior",
    "basal inferolateral",
    "basal anterolateral",
    "mid anterior",
    "mid anteroseptal",
    "mid inferoseptal",
    "mid inferior",
    "mid inferolateral",
    "mid anterolateral",
    "apical anterior",
    "apical septal",
    "apical inferior",
    "apical lateral",
    "apex",
];

/// Neighbours of each segment (index `s - 1`), ascending.
const ADJACENCY: [&[u8]; SEGMENT_COUNT] = [
    &[2, 6, 7],
    &[1, 3, 8],
    &[2, 4, 9],
    &[3, 5, 10],
    &[4, 6, 11],
    &[1, 5, 12],
    &[1, 8, 12, 13],
    &[2, 7, 9, 14],
    &[3, 8, 10, 14, 15],
    &[4, 9, 11, 15],
    &[5, 10, 12, 16],
    &[6, 7, 11, 13, 16],
    &[7, 12, 14, 16, 17],
    &[8, 9, 13, 15, 17],
    &[9, 10, 14, 16, 17],
    &[11, 12, 13, 15, 17],
    &[13, 14, 15, 16],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ring {
    Basal,
    Mid,
    Apical,
    Apex,
}

impl Ring {
    pub const ALL: [Ring; 4] = [Ring::Basal, Ring::Mid, Ring::Apical, Ring::Apex];

    pub fn of(segment: u8) -> Result<Ring> {
        Ok(match segment {
            1..=6 => Ring::Basal,
            7..=12 => Ring::Mid,
            13..=16 => Ring::Apical,
            17 => Ring::Apex,
            s => return Err(Error::SegmentOutOfRange(s)),
        })
    }

    pub fn segments(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Ring::Basal => 1..=6,
            Ring::Mid => 7..=12,
            Ring::Apical => 13..=16,
            Ring::Apex => 17..=17,
        }
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ring::Basal => "basal",
            Ring::Mid => "mid",
            Ring::Apical => "apical",
            Ring::Apex => "apex",
        })
    }
}

pub fn segment_name(segment: u8) -> Result<&'static str> {
    Ring::of(segment)?;
    Ok(SEGMENT_NAMES[segment as usize - 1])
}

/// Segments sharing a boundary with `segment`.
pub fn adjacency(segment: u8) -> Result<&'static [u8]> {
    Ring::of(segment)?;
    Ok(ADJACENCY[segment as usize - 1])
}

/// Validated AHA-17 label image with per-segment voxel counts.
#[derive(Clone, Debug)]
pub struct AhaAtlas {
    labels: LabelVolume,
    counts: [usize; SEGMENT_COUNT],
}

/// Validates a label image (values 0..=17) and builds an atlas. Segments
/// without voxels are recorded as absent.
pub fn load_atlas(labels: LabelVolume) -> Result<AhaAtlas> {
    let mut counts = [0usize; SEGMENT_COUNT];
    for &l in labels.data() {
        match l {
            0 => {}
            1..=17 => counts[l as usize - 1] += 1,
            other => return Err(Error::LabelOutOfRange(other as u32)),
        }
    }
    Ok(AhaAtlas { labels, counts })
}

impl AhaAtlas {
    pub fn labels(&self) -> &LabelVolume {
        &self.labels
    }

    pub fn voxel_count(&self, segment: u8) -> usize {
        Ring::of(segment).map(|_| self.counts[segment as usize - 1]).unwrap_or(0)
    }

    pub fn is_present(&self, segment: u8) -> bool {
        self.voxel_count(segment) > 0
    }

    pub fn present_segments(&self) -> Vec<u8> {
        (1..=17).filter(|&s| self.is_present(s)).collect()
    }

    pub fn segment_volume_ml(&self, segment: u8) -> f64 {
        self.voxel_count(segment) as f64 * self.labels.geometry().voxel_volume_mm3() / 1000.0
    }

    pub fn segment_mask(&self, segment: u8) -> Mask3 {
        self.labels.map(|l| l == segment as u16)
    }

    /// Union of all labelled voxels.
    pub fn myocardium(&self) -> Mask3 {
        self.labels.map(|l| l > 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    #[test]
    fn adjacency_examples() {
        assert_eq!(adjacency(17).unwrap(), &[13, 14, 15, 16]);
        let one = adjacency(1).unwrap();
        assert!(one.contains(&2) && one.contains(&6) && one.contains(&7));
        assert!(adjacency(0).is_err() && adjacency(18).is_err());
    }

    #[test]
    fn adjacency_is_symmetric_irreflexive_and_connected() {
        for i in 1..=17u8 {
            for &j in adjacency(i).unwrap() {
                assert_ne!(i, j);
                assert!(adjacency(j).unwrap().contains(&i), "{i}-{j}");
            }
        }
        let mut seen = [false; 18];
        let mut stack = vec![1u8];
        while let Some(s) = stack.pop() {
            if std::mem::replace(&mut seen[s as usize], true) {
                continue;
            }
            stack.extend(adjacency(s).unwrap());
        }
        assert!(seen[1..].iter().all(|&b| b));
    }

    #[test]
    fn rings_cover_segments() {
        for r in Ring::ALL {
            for s in r.segments() {
                assert_eq!(Ring::of(s).unwrap(), r);
            }
        }
        assert_eq!(segment_name(8).unwrap(), "mid anteroseptal");
    }

    #[test]
    fn load_atlas_validates_labels() {
        let g = Geometry::new([18, 1, 1], [1.0; 3]).unwrap();
        let all = LabelVolume::from_fn(g, |x, _, _| x as u16);
        let atlas = load_atlas(all).unwrap();
        assert_eq!(atlas.present_segments().len(), 17);
        let bad = LabelVolume::from_fn(g, |x, _, _| x as u16 + 1);
        assert!(matches!(load_atlas(bad), Err(Error::LabelOutOfRange(18))));
    }
}
