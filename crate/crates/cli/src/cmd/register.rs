use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;

use scarforge_core::nrrd::{load_nrrd, save_nrrd};
use scarforge_core::preprocess::Interp;
use scarforge_core::register::{
    demons_register_detailed, mutual_information, rigid_register, warp, warp_onto, RigidTransform, StageOrder,
    Transform,
};
use scarforge_core::Volume3;

use crate::cmd::{create_dir, to_json, write_atomic};
use crate::config::{require_existing, PipelineConfig};
use crate::{Failure, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rigid,
    Demons,
    Both,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    fixed: PathBuf,
    #[arg(long)]
    moving: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Rigid)]
    mode: Mode,
    /// Resample the moving image onto the fixed grid first when their dims
    /// differ.
    #[arg(long)]
    resample: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Report {
    mode: Mode,
    mi_before: f64,
    mi_after: f64,
    mse_before: f64,
    mse_after: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rigid: Option<RigidTransform>,
    #[serde(skip_serializing_if = "Option::is_none")]
    translation_voxels: Option<[f64; 3]>,
}

const MI_BINS: usize = 32;

fn mse(a: &Volume3, b: &Volume3) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn run(args: Args, mut config: PipelineConfig) -> Result<Status, Failure> {
    if args.out.is_some() {
        config.output_dir = args.out.clone();
    }
    let out = config.output_dir()?.to_path_buf();
    require_existing([args.fixed.as_path(), args.moving.as_path()])?;
    config.demons.validate().map_err(|e| Failure::Config(e.to_string()))?;
    config.rigid.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let fixed: Volume3 = load_nrrd(&args.fixed)?;
    let mut moving: Volume3 = load_nrrd(&args.moving)?;
    let fg = *fixed.geometry();
    if moving.dims() != fg.dims {
        if args.resample {
            let id = RigidTransform::identity(fg.center());
            moving = warp_onto(&moving, &fg, Transform::Rigid(&id), Interp::Trilinear)?;
        } else if args.mode != Mode::Rigid {
            return Err(Failure::Config(format!(
                "fixed dims {:?} and moving dims {:?} differ; pass --resample",
                fg.dims,
                moving.dims()
            )));
        }
    }
    create_dir(&out)?;

    let mut rigid = None;
    let mut initial_mi = None;
    let mut run_rigid = |m: &Volume3| -> Result<Volume3, Failure> {
        let r = rigid_register(&fixed, m, &config.rigid)?;
        initial_mi.get_or_insert(r.initial_mi);
        rigid = Some(r.transform);
        Ok(warp_onto(m, &fg, Transform::Rigid(&r.transform), Interp::Trilinear)?)
    };
    let mut field = None;
    let mut run_demons = |m: &Volume3| -> Result<Volume3, Failure> {
        let r = demons_register_detailed(&fixed, m, &config.demons)?;
        let w = warp(m, &r.field, Interp::Trilinear)?;
        field = Some(r.field);
        Ok(w)
    };
    let warped = match (args.mode, config.registration_order) {
        (Mode::Rigid, _) => run_rigid(&moving)?,
        (Mode::Demons, _) => run_demons(&moving)?,
        (Mode::Both, StageOrder::DemonsThenRigid) => run_rigid(&run_demons(&moving)?)?,
        (Mode::Both, StageOrder::RigidThenDemons) => run_demons(&run_rigid(&moving)?)?,
    };

    let same_grid = moving.dims() == fg.dims;
    let report = Report {
        mode: args.mode,
        mi_before: match initial_mi {
            Some(mi) if !same_grid => mi,
            _ => mutual_information(&fixed, &moving, MI_BINS)?,
        },
        mi_after: mutual_information(&fixed, &warped, MI_BINS)?,
        mse_before: if same_grid { mse(&fixed, &moving) } else { f64::NAN },
        mse_after: mse(&fixed, &warped),
        rigid,
        translation_voxels: rigid.map(|t| std::array::from_fn(|a| t.translation[a] / fg.spacing[a])),
    };
    if let Some(t) = &rigid {
        t.save_json(out.join("rigid.json"))?;
    }
    if let Some(f) = &field {
        f.save_nrrd(out.join("field.nrrd"))?;
    }
    save_nrrd(&warped, out.join("warped.nrrd"))?;
    write_atomic(&out.join("register_report.json"), &to_json(&report)?)?;
    println!("mutual information {:.4} -> {:.4}", report.mi_before, report.mi_after);
    if let (Some(t), Some(v)) = (&rigid, report.translation_voxels) {
        println!(
            "rigid: translation {:.3} {:.3} {:.3} voxels, angles {:.4} {:.4} {:.4} rad",
            v[0], v[1], v[2], t.angles[0], t.angles[1], t.angles[2]
        );
    }
    Ok(Status::Complete)
}
