//! Image registration: mutual-information rigid alignment, symmetric-forces
//! demons and warping.

mod demons;
pub mod mi;
mod rigid;
mod transform;
mod warp;

use serde::{Deserialize, Serialize};

pub use demons::{demons_register, demons_register_detailed, DemonsParams, DemonsResult};
pub use mi::{marginal_entropy, mutual_information};
pub use rigid::{rigid_register, RigidConfig, RigidResult};
pub use transform::{DisplacementField, RigidTransform};
pub use warp::{warp, warp_onto, Transform};

use crate::filter::gaussian_smooth;
use crate::volume::{Geometry, Volume3};

/// Which stage runs first when both rigid and non-rigid registration are
/// chained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageOrder {
    /// Non-rigid demons, then rigid MI refinement.
    #[default]
    DemonsThenRigid,
    RigidThenDemons,
}

/// Halves resolution after σ = 1 voxel smoothing. Axes of length 1 are
/// left alone.
pub(crate) fn downsample(v: &Volume3) -> Volume3 {
    let g = v.geometry();
    let smooth_sigma: [f64; 3] = std::array::from_fn(|a| if g.dims[a] > 1 { 1.0 } else { 0.0 });
    let smoothed = gaussian_smooth(v.data(), g.dims, smooth_sigma);
    let dims: [usize; 3] = std::array::from_fn(|a| g.dims[a].div_ceil(2));
    let factor: [usize; 3] = std::array::from_fn(|a| if g.dims[a] > 1 { 2 } else { 1 });
    let geom = Geometry {
        dims,
        spacing: std::array::from_fn(|a| g.spacing[a] * factor[a] as f64),
        ..*g
    };
    Volume3::from_fn(geom, |x, y, z| {
        smoothed[g.index(x * factor[0], y * factor[1], z * factor[2])]
    })
}

/// Coarse-to-fine list ending with the input itself.
pub(crate) fn pyramid(v: &Volume3, levels: usize) -> Vec<Volume3> {
    let mut out = vec![v.clone()];
    for _ in 1..levels {
        let next = downsample(out.last().expect("non-empty"));
        out.push(next);
    }
    out.reverse();
    out
}
