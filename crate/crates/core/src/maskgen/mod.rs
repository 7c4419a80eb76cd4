//! Atlas-guided scar mask generation.
//!
//! A scar is built by choosing a connected set of AHA segments, drawing a
//! target volume for each, growing a textured blob inside each segment to
//! that volume, merging and cleaning up the union, and optionally carrying
//! the result from template space into a subject's myocardium.

mod blob;
mod morph;
mod subject;

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use blob::{component_second_moments, generate_blob, generate_blob_with_sigma, BlobField, DEFAULT_BASE_SIGMA};
pub use morph::{
    connected_components, distance_to_foreground, erode, fill_holes, postprocess, remove_small_components,
    signed_distance,
};
pub use subject::{to_subject_space, to_subject_space_detailed, SubjectMapping, SubjectRegistration};

use crate::atlas::{adjacency, segment_name, AhaAtlas, Ring};
use crate::error::{Error, Result};
use crate::nrrd::save_nrrd_with_meta;
use crate::rng::{derive_seed, rng_from_seed};
use crate::volume::Mask3;

/// Relative volume tolerance for a placed region.
pub const VOLUME_TOLERANCE: f64 = 0.15;
/// Fraction of a segment's volume a request is capped at.
pub const SEGMENT_CAP: f64 = 0.95;
const BISECTION_STEPS: usize = 20;
const RETRIES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScarSpec {
    pub n_regions: usize,
    pub allowed_rings: Vec<Ring>,
    /// Per-region volume range in mL.
    pub volume_ml: [f64; 2],
    /// Per-axis multipliers of the blob correlation length.
    pub anisotropy: [f64; 3],
    /// Blob correlation length in mm before anisotropy.
    pub blob_sigma_mm: f64,
    pub porosity: [f64; 2],
    /// Candidate cubic erosion sizes.
    pub kernels: Vec<usize>,
    /// Clean-up smoothing σ in voxels.
    pub smooth_sigma: f64,
    pub min_component_voxels: usize,
    pub seed: u64,
}

impl Default for ScarSpec {
    fn default() -> Self {
        ScarSpec {
            n_regions: 2,
            allowed_rings: Ring::ALL.to_vec(),
            volume_ml: [2.0, 40.0],
            anisotropy: [1.0; 3],
            blob_sigma_mm: 3.0,
            porosity: [0.3, 0.7],
            kernels: vec![1, 3, 5, 7],
            smooth_sigma: 0.5,
            min_component_voxels: 20,
            seed: 0,
        }
    }
}

impl ScarSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(1..=17).contains(&self.n_regions) {
            return bad(format!("n_regions must be in 1..=17, got {}", self.n_regions));
        }
        if self.allowed_rings.is_empty() {
            return bad("allowed_rings is empty".into());
        }
        let [v0, v1] = self.volume_ml;
        if !(v0 >= 0.0 && v0 <= v1 && v1.is_finite()) {
            return bad(format!("volume range must satisfy 0 <= min <= max, got {:?}", self.volume_ml));
        }
        let [p0, p1] = self.porosity;
        if !(p0 > 0.0 && p0 <= p1 && p1 <= 1.0) {
            return bad(format!("porosity range must satisfy 0 < min <= max <= 1, got {:?}", self.porosity));
        }
        blob::validate_anisotropy(self.anisotropy)?;
        if !(self.blob_sigma_mm > 0.0 && self.blob_sigma_mm.is_finite()) {
            return bad(format!("blob_sigma_mm must be positive, got {}", self.blob_sigma_mm));
        }
        if self.kernels.is_empty() || self.kernels.iter().any(|&k| !(1..=7).contains(&k) || k % 2 == 0) {
            return bad(format!("kernels must be odd sizes in 1..=7, got {:?}", self.kernels));
        }
        if !(self.smooth_sigma >= 0.0 && self.smooth_sigma.is_finite()) {
            return bad(format!("smooth_sigma must be >= 0, got {}", self.smooth_sigma));
        }
        Ok(())
    }

    pub fn without_apex(mut self) -> Self {
        self.allowed_rings.retain(|&r| r != Ring::Apex);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScarSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Segments usable under `spec`: present in the atlas and in an allowed
/// ring.
fn allowed_segments(atlas: &AhaAtlas, spec: &ScarSpec) -> Vec<u8> {
    (1..=17u8)
        .filter(|&s| atlas.is_present(s) && spec.allowed_rings.contains(&Ring::of(s).expect("valid id")))
        .collect()
}

/// Connected components of the adjacency graph restricted to `allowed`.
fn components(allowed: &[u8]) -> Vec<Vec<u8>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &s in allowed {
        if seen.contains(&s) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![s];
        seen.insert(s);
        while let Some(c) = stack.pop() {
            comp.push(c);
            for &n in adjacency(c).expect("valid id") {
                if allowed.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Draws `spec.n_regions` segments forming a connected set under the AHA
/// adjacency, by random connected growth from a uniformly chosen start.
/// The order of the result is the order of selection.
pub fn select_regions(atlas: &AhaAtlas, spec: &ScarSpec, rng: &mut impl Rng) -> Result<Vec<u8>> {
    spec.validate()?;
    let n = spec.n_regions;
    let allowed = allowed_segments(atlas, spec);
    let comps = components(&allowed);
    let largest = comps.iter().map(Vec::len).max().unwrap_or(0);
    let starts: Vec<u8> = comps.iter().filter(|c| c.len() >= n).flatten().copied().collect();
    if starts.is_empty() {
        return Err(Error::NoConnectedSet { requested: n, largest });
    }
    let mut chosen = vec![starts[rng.random_range(0..starts.len())]];
    while chosen.len() < n {
        let frontier: BTreeSet<u8> = chosen
            .iter()
            .flat_map(|&c| adjacency(c).expect("valid id").iter().copied())
            .filter(|s| allowed.contains(s) && !chosen.contains(s))
            .collect();
        let frontier: Vec<u8> = frontier.into_iter().collect();
        chosen.push(frontier[rng.random_range(0..frontier.len())]);
    }
    Ok(chosen)
}

/// A drawn target volume for one region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeRequest {
    pub segment: u8,
    /// Uniform draw from the `ScarSpec` volume range.
    pub sampled_ml: f64,
    /// The draw after capping at [`SEGMENT_CAP`] of the segment volume.
    pub target_ml: f64,
    pub capped: bool,
}

/// One uniform volume draw per region, capped at 95% of the segment's
/// myocardial volume.
pub fn sample_volumes(atlas: &AhaAtlas, regions: &[u8], spec: &ScarSpec, rng: &mut impl Rng) -> Vec<VolumeRequest> {
    let [lo, hi] = spec.volume_ml;
    regions
        .iter()
        .map(|&segment| {
            let sampled_ml = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let cap = SEGMENT_CAP * atlas.segment_volume_ml(segment);
            let capped = sampled_ml > cap;
            VolumeRequest {
                segment,
                sampled_ml,
                target_ml: if capped { cap } else { sampled_ml },
                capped,
            }
        })
        .collect()
}

/// A blob placed in one segment.
#[derive(Clone, Debug)]
pub struct PlacedRegion {
    pub mask: Mask3,
    pub achieved_ml: f64,
    pub porosity: f64,
    pub kernel: usize,
    /// Noise fields drawn (1 plus retries).
    pub attempts: usize,
}

/// Grows a textured blob inside `segment ∩ myocardium` to `target_ml`.
///
/// The blob lives on the segment's bounding box padded by the erosion
/// radius. Porosity starts from a uniform draw in the `ScarSpec` range and is
/// bisected until the eroded, clipped blob is within ±15% of the target or
/// 20 steps have been taken; the whole process restarts with fresh noise up
/// to five times when that fails. The closest result is returned unless it
/// is below 10% of the target.
pub fn place_region_scar(
    atlas: &AhaAtlas,
    myocardium: &Mask3,
    segment: u8,
    target_ml: f64,
    spec: &ScarSpec,
    rng: &mut impl Rng,
) -> Result<PlacedRegion> {
    spec.validate()?;
    let geom = *atlas.labels().geometry();
    geom.ensure_matches(myocardium.geometry(), "place_region_scar")?;
    Ring::of(segment)?;
    let voxel_ml = geom.voxel_volume_mm3() / 1000.0;
    if !(target_ml >= voxel_ml) {
        return Err(Error::InvalidParameter(format!(
            "target {target_ml} mL is below one voxel ({voxel_ml} mL)"
        )));
    }
    let region = atlas.segment_mask(segment).and(myocardium)?;
    let (lo, hi) = region.bbox().ok_or(Error::EmptyMask)?;
    let kernel = spec.kernels[rng.random_range(0..spec.kernels.len())];
    let r = kernel / 2;
    let dims: [usize; 3] = std::array::from_fn(|a| hi[a] - lo[a] + 1 + 2 * r);
    let [wx, wy, wz] = dims;
    // Work-box voxel -> grid index, for voxels inside the segment.
    let mut inside: Vec<Option<usize>> = vec![None; wx * wy * wz];
    for z in 0..wz {
        for y in 0..wy {
            for x in 0..wx {
                let g = [x + lo[0], y + lo[1], z + lo[2]].map(|c| c as i64 - r as i64);
                if let Some(gi) = geom.checked_index(g) {
                    if region.data()[gi] {
                        inside[x + wx * (y + wy * z)] = Some(gi);
                    }
                }
            }
        }
    }
    let sigma: [f64; 3] = std::array::from_fn(|a| spec.blob_sigma_mm * spec.anisotropy[a] / geom.spacing[a]);
    let [p_lo, p_hi] = spec.porosity;
    let p_start = if p_hi > p_lo { rng.random_range(p_lo..=p_hi) } else { p_lo };

    let volume_at = |field: &BlobField, p: f64| -> (Vec<bool>, f64) {
        let eroded = morph::erode_raw(&field.threshold(p), dims, kernel);
        let count = eroded.iter().zip(&inside).filter(|(&e, i)| e && i.is_some()).count();
        (eroded, count as f64 * voxel_ml)
    };
    let within = |ml: f64| (ml - target_ml).abs() <= VOLUME_TOLERANCE * target_ml;

    let mut best: Option<(Vec<bool>, f64, f64)> = None;
    let mut attempts = 0;
    for _ in 0..=RETRIES {
        attempts += 1;
        let field = BlobField::new(dims, sigma, rng)?;
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut p = p_start;
        for _ in 0..BISECTION_STEPS {
            let (blob, ml) = volume_at(&field, p);
            let better = best.as_ref().is_none_or(|(_, bml, _)| (ml - target_ml).abs() < (bml - target_ml).abs());
            if better {
                best = Some((blob, ml, p));
            }
            if within(ml) {
                break;
            }
            if ml < target_ml {
                a = p;
            } else {
                b = p;
            }
            p = 0.5 * (a + b);
        }
        if best.as_ref().is_some_and(|(_, ml, _)| within(*ml)) {
            break;
        }
    }
    let (blob, achieved_ml, porosity) = best.expect("at least one evaluation");
    if achieved_ml < 0.1 * target_ml {
        return Err(Error::VolumeUnreachable {
            segment,
            target_ml,
            achieved_ml,
        });
    }
    let mut mask = Mask3::filled(geom, false);
    let data = mask.data_mut();
    for (w, gi) in inside.iter().enumerate() {
        if let (true, Some(gi)) = (blob[w], gi) {
            data[*gi] = true;
        }
    }
    Ok(PlacedRegion {
        mask,
        achieved_ml,
        porosity,
        kernel,
        attempts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub segment: u8,
    pub name: String,
    pub requested_ml: f64,
    pub target_ml: f64,
    pub capped: bool,
    /// Volume of the placed blob before merging and clean-up.
    pub achieved_ml: f64,
    /// Volume of the final mask inside this segment.
    pub final_ml: f64,
    pub porosity: f64,
    pub kernel: usize,
    pub attempts: usize,
}

/// A generated scar in template space with its provenance.
#[derive(Clone, Debug, Serialize)]
pub struct GeneratedScar {
    #[serde(skip)]
    pub mask: Mask3,
    pub seed: u64,
    pub regions: Vec<RegionRecord>,
    pub total_ml: f64,
    pub warnings: Vec<String>,
}

impl GeneratedScar {
    /// Writes the mask as NRRD and the records as a JSON file alongside it
    /// (same stem, `.json` extension).
    pub fn save(&self, nrrd_path: impl AsRef<Path>) -> Result<()> {
        let path = nrrd_path.as_ref();
        save_nrrd_with_meta(&self.mask, path, &[("seed", self.seed.to_string())])?;
        let json_path = path.with_extension("json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))
    }
}

/// Full generation pipeline for one scar. Regions are placed in parallel,
/// each with its own stream derived from the `ScarSpec` seed, so the output does
/// not depend on the thread count.
pub fn generate_scar_mask(atlas: &AhaAtlas, myo_template: &Mask3, spec: &ScarSpec) -> Result<GeneratedScar> {
    spec.validate()?;
    atlas.labels().geometry().ensure_matches(myo_template.geometry(), "generate_scar_mask")?;
    let mut rng = rng_from_seed(spec.seed);
    let regions = select_regions(atlas, spec, &mut rng)?;
    let requests = sample_volumes(atlas, &regions, spec, &mut rng);
    let mut warnings = Vec::new();
    for r in requests.iter().filter(|r| r.capped) {
        warnings.push(format!(
            "segment {}: requested {:.3} mL capped at {:.3} mL",
            r.segment, r.sampled_ml, r.target_ml
        ));
    }
    let placed: Vec<PlacedRegion> = requests
        .par_iter()
        .enumerate()
        .map(|(i, req)| {
            let mut region_rng = rng_from_seed(derive_seed(spec.seed, i as u64 + 1));
            place_region_scar(atlas, myo_template, req.segment, req.target_ml, spec, &mut region_rng)
        })
        .collect::<Result<_>>()?;
    let mut union = Mask3::filled(*myo_template.geometry(), false);
    for p in &placed {
        union = union.or(&p.mask)?;
    }
    let mask = postprocess(&union, Some(myo_template), spec.smooth_sigma, spec.min_component_voxels)?;
    let voxel_ml = mask.geometry().voxel_volume_mm3() / 1000.0;
    if mask.is_all_background() {
        warnings.push("clean-up removed the whole scar".into());
    }
    let records = requests
        .iter()
        .zip(&placed)
        .map(|(req, p)| {
            let in_segment = mask
                .data()
                .iter()
                .zip(atlas.labels().data())
                .filter(|(&m, &l)| m && l == req.segment as u16)
                .count();
            RegionRecord {
                segment: req.segment,
                name: segment_name(req.segment).expect("valid id").to_string(),
                requested_ml: req.sampled_ml,
                target_ml: req.target_ml,
                capped: req.capped,
                achieved_ml: p.achieved_ml,
                final_ml: in_segment as f64 * voxel_ml,
                porosity: p.porosity,
                kernel: p.kernel,
                attempts: p.attempts,
            }
        })
        .collect();
    Ok(GeneratedScar {
        total_ml: mask.count() as f64 * voxel_ml,
        mask,
        seed: spec.seed,
        regions: records,
        warnings,
    })
}
