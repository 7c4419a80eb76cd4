//! Transfer of a template-space scar into a subject's myocardium.
//!
//! Both myocardium masks are turned into signed distance maps. The
//! template is first brought onto the subject grid with a translation that
//! matches the mask centroids, then demons and rigid MI registration align
//! the distance maps (demons first by default). The scar is resampled once
//! through the composed mapping with nearest-neighbour lookup.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{nearest_index, sample_trilinear_clamped};
use crate::preprocess::Interp;
use crate::register::{
    demons_register, rigid_register, warp, warp_onto, DemonsParams, DisplacementField, RigidConfig, RigidTransform,
    StageOrder, Transform,
};
use crate::volume::{Geometry, Mask3};

use super::morph::signed_distance;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubjectRegistration {
    pub order: StageOrder,
    pub demons: DemonsParams,
    pub rigid: RigidConfig,
}

/// Result of a template-to-subject transfer.
#[derive(Clone, Debug)]
pub struct SubjectMapping {
    pub mask: Mask3,
    /// Centroid-matching translation from subject to template space.
    pub initial: RigidTransform,
    pub field: DisplacementField,
    pub rigid: RigidTransform,
}

/// Maps `scar` (on the template grid) into subject space, clips it to
/// `myo_subject` and merges it with `existing_scar` when given.
pub fn to_subject_space(
    scar: &Mask3,
    myo_template: &Mask3,
    myo_subject: &Mask3,
    existing_scar: Option<&Mask3>,
    reg: &SubjectRegistration,
) -> Result<Mask3> {
    to_subject_space_detailed(scar, myo_template, myo_subject, existing_scar, reg).map(|m| m.mask)
}

pub fn to_subject_space_detailed(
    scar: &Mask3,
    myo_template: &Mask3,
    myo_subject: &Mask3,
    existing_scar: Option<&Mask3>,
    reg: &SubjectRegistration,
) -> Result<SubjectMapping> {
    scar.geometry().ensure_matches(myo_template.geometry(), "to_subject_space (template)")?;
    let sg = *myo_subject.geometry();
    if let Some(e) = existing_scar {
        e.geometry().ensure_matches(&sg, "to_subject_space (existing scar)")?;
    }
    let tg = *myo_template.geometry();
    let ct = tg.to_physical(myo_template.centroid().ok_or(Error::EmptyMask)?);
    let cs = sg.to_physical(myo_subject.centroid().ok_or(Error::EmptyMask)?);
    let initial = RigidTransform::translation([ct[0] - cs[0], ct[1] - cs[1], ct[2] - cs[2]], sg.center());

    let template_on_subject = warp_onto(myo_template, &sg, Transform::Rigid(&initial), Interp::Nearest)?;
    let fixed = signed_distance(myo_subject)?;
    let moving = signed_distance(&template_on_subject)?;

    let (field, rigid) = match reg.order {
        StageOrder::DemonsThenRigid => {
            let field = demons_register(&fixed, &moving, &reg.demons)?;
            let warped = warp(&moving, &field, Interp::Trilinear)?;
            let rigid = rigid_register(&fixed, &warped, &reg.rigid)?.transform;
            (field, rigid)
        }
        StageOrder::RigidThenDemons => {
            let rigid = rigid_register(&fixed, &moving, &reg.rigid)?.transform;
            let aligned = warp(&moving, &rigid, Interp::Trilinear)?;
            let field = demons_register(&fixed, &aligned, &reg.demons)?;
            (field, rigid)
        }
    };

    let mapped = resample_composed(scar, &sg, &initial, &field, &rigid, reg.order);
    let mut mask = mapped.and(myo_subject)?;
    if mask.is_all_background() {
        return Err(Error::EmptyMask);
    }
    if let Some(e) = existing_scar {
        mask = mask.or(e)?;
    }
    Ok(SubjectMapping {
        mask,
        initial,
        field,
        rigid,
    })
}

/// Displacement (mm) at a physical point of the field's grid, trilinear
/// with edge clamping.
fn field_at(field: &DisplacementField, comps: &[Vec<f64>; 3], p: [f64; 3]) -> [f64; 3] {
    let g = field.geometry();
    let idx = g.to_index(p);
    std::array::from_fn(|c| sample_trilinear_clamped(&comps[c], g.dims, idx))
}

fn resample_composed(
    scar: &Mask3,
    reference: &Geometry,
    initial: &RigidTransform,
    field: &DisplacementField,
    rigid: &RigidTransform,
    order: StageOrder,
) -> Mask3 {
    let comps: [Vec<f64>; 3] = std::array::from_fn(|c| field.data().iter().map(|d| d[c]).collect());
    let src = *scar.geometry();
    Mask3::from_fn(*reference, |x, y, z| {
        let p = reference.to_physical([x as f64, y as f64, z as f64]);
        let q = match order {
            StageOrder::DemonsThenRigid => {
                let r = rigid.apply(p);
                let d = field_at(field, &comps, r);
                [r[0] + d[0], r[1] + d[1], r[2] + d[2]]
            }
            StageOrder::RigidThenDemons => {
                let d = field.data()[reference.index(x, y, z)];
                rigid.apply([p[0] + d[0], p[1] + d[1], p[2] + d[2]])
            }
        };
        let t = initial.apply(q);
        nearest_index(src.dims, src.to_index(t)).is_some_and(|i| scar.data()[i])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskgen::{generate_scar_mask, ScarSpec};
    use crate::phantom::{cardiac_phantom, PhantomSpec};

    fn dice(a: &Mask3, b: &Mask3) -> f64 {
        let inter = a.and(b).unwrap().count() as f64;
        2.0 * inter / (a.count() + b.count()) as f64
    }

    #[test]
    fn identity_subject_keeps_scar() {
        let p = cardiac_phantom(&PhantomSpec::default()).unwrap();
        let atlas = p.atlas().unwrap();
        let scar = generate_scar_mask(&atlas, &p.myocardium, &ScarSpec::default()).unwrap().mask;
        let out = to_subject_space(&scar, &p.myocardium, &p.myocardium, None, &Default::default()).unwrap();
        assert!(dice(&out, &scar) > 0.95);
    }

    #[test]
    fn existing_scar_is_preserved() {
        let p = cardiac_phantom(&PhantomSpec::default()).unwrap();
        let atlas = p.atlas().unwrap();
        let scar = atlas.segment_mask(3);
        let existing = atlas.segment_mask(10);
        let out = to_subject_space(&scar, &p.myocardium, &p.myocardium, Some(&existing), &Default::default()).unwrap();
        assert!(existing.data().iter().zip(out.data()).all(|(&e, &o)| !e || o));
    }
}
