//! Synthetic anatomy for tests, demos and the acceptance suite.
//!
//! The cardiac phantom is a closed-apex cylindrical cup: a myocardial
//! annulus around a blood pool, capped at the apical end. The long axis runs
//! along +z from base to apex. Sizes are given for a 64³ grid at 1.5 mm and
//! scale with the grid size (128³ gives 0.75 mm voxels over the same field
//! of view).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::atlas::{analytic_partition, load_atlas, AhaAtlas, RingSplits};
use crate::error::{Error, Result};
use crate::filter::gaussian_smooth;
use crate::rng::{rng_from_seed, white_noise};
use crate::volume::{Geometry, LabelVolume, Mask3, Volume3};

/// Field of view of the cardiac phantom along each axis, in mm.
pub const FIELD_OF_VIEW_MM: f64 = 96.0;

/// Smooth textured volume with a handful of anisotropic Gaussian blobs on
/// an `n³` grid with 1 mm spacing. Useful as a registration target.
pub fn smooth_blob_phantom(n: usize, seed: u64) -> Volume3 {
    let geom = Geometry::new([n; 3], [1.0; 3]).expect("n > 0");
    let mut rng = rng_from_seed(seed);
    let nf = n as f64;
    let blobs: Vec<([f64; 3], [f64; 3], f64)> = (0..6)
        .map(|_| {
            let c = std::array::from_fn(|_| rng.random_range(0.3..0.7) * nf);
            let s = std::array::from_fn(|_| rng.random_range(0.08..0.16) * nf);
            (c, s, rng.random_range(0.5..1.0))
        })
        .collect();
    let noise = gaussian_smooth(&white_noise(&mut rng, geom.len()), geom.dims, [1.5; 3]);
    let sd = (noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64).sqrt().max(1e-12);
    Volume3::from_fn(geom, |x, y, z| {
        let p = [x as f64, y as f64, z as f64];
        let bump: f64 = blobs
            .iter()
            .map(|(c, s, a)| {
                let q: f64 = (0..3).map(|k| ((p[k] - c[k]) / s[k]).powi(2)).sum();
                a * (-0.5 * q).exp()
            })
            .sum();
        bump + 0.15 * noise[geom.index(x, y, z)] / sd
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    /// Grid size per axis.
    pub size: usize,
    /// Translation of the anatomy in voxels.
    pub shift_voxels: [f64; 3],
    /// Uniform scaling of radii and long-axis extent.
    pub scale: f64,
    /// Amplitude of smooth intensity texture.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            size: 64,
            shift_voxels: [0.0; 3],
            scale: 1.0,
            noise: 0.03,
            seed: 0,
        }
    }
}

/// Intensities of the cardiac phantom tissues.
pub const BACKGROUND_INTENSITY: f64 = 0.1;
pub const BLOOD_INTENSITY: f64 = 0.6;
pub const MYOCARDIUM_INTENSITY: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct CardiacPhantom {
    pub image: Volume3,
    pub myocardium: Mask3,
    pub blood_pool: Mask3,
    pub labels: LabelVolume,
}

impl CardiacPhantom {
    pub fn atlas(&self) -> Result<AhaAtlas> {
        load_atlas(self.labels.clone())
    }

    pub fn geometry(&self) -> &Geometry {
        self.image.geometry()
    }
}

/// Cup geometry in voxel coordinates.
struct Cup {
    cx: f64,
    cy: f64,
    r_in: f64,
    r_out: f64,
    z0: f64,
    z1: f64,
    cap: f64,
}

impl Cup {
    fn new(spec: &PhantomSpec) -> Cup {
        let n = spec.size as f64;
        let s = n / 64.0;
        let k = spec.scale;
        let mid = (n - 1.0) / 2.0;
        let half_len = (mid - 8.0 * s) * k;
        Cup {
            cx: mid + spec.shift_voxels[0],
            cy: mid + spec.shift_voxels[1],
            r_in: 12.0 * s * k,
            r_out: 20.0 * s * k,
            z0: mid - half_len + spec.shift_voxels[2],
            z1: mid + half_len + spec.shift_voxels[2],
            cap: 4.0 * s * k,
        }
    }

    fn classify(&self, x: usize, y: usize, z: usize) -> (bool, bool) {
        let r = ((x as f64 - self.cx).powi(2) + (y as f64 - self.cy).powi(2)).sqrt();
        let z = z as f64;
        if z < self.z0 || z > self.z1 || r > self.r_out {
            return (false, false);
        }
        let in_cap = z > self.z1 - self.cap;
        let myo = r >= self.r_in || in_cap;
        (myo, !myo)
    }
}

/// Builds the cardiac phantom with AHA labels from the analytic partition
/// (long axis +z, RV insertion at angle 0, default ring splits).
pub fn cardiac_phantom(spec: &PhantomSpec) -> Result<CardiacPhantom> {
    if spec.size < 8 || !(spec.scale > 0.0) || !(spec.noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("invalid phantom spec {spec:?}")));
    }
    let spacing = FIELD_OF_VIEW_MM / spec.size as f64;
    let geom = Geometry::new([spec.size; 3], [spacing; 3])?;
    let cup = Cup::new(spec);
    let myocardium = Mask3::from_fn(geom, |x, y, z| cup.classify(x, y, z).0);
    let blood_pool = Mask3::from_fn(geom, |x, y, z| cup.classify(x, y, z).1);
    let labels = analytic_partition(&myocardium, [0.0, 0.0, 1.0], 0.0, &RingSplits::default())?;
    let mut rng = rng_from_seed(spec.seed);
    let texture = if spec.noise > 0.0 {
        gaussian_smooth(&white_noise(&mut rng, geom.len()), geom.dims, [1.0; 3])
    } else {
        vec![0.0; geom.len()]
    };
    let image = Volume3::from_fn(geom, |x, y, z| {
        let i = geom.index(x, y, z);
        let base = if myocardium.data()[i] {
            MYOCARDIUM_INTENSITY
        } else if blood_pool.data()[i] {
            BLOOD_INTENSITY
        } else {
            BACKGROUND_INTENSITY
        };
        base + spec.noise * texture[i]
    });
    Ok(CardiacPhantom {
        image,
        myocardium,
        blood_pool,
        labels,
    })
}
