use std::path::PathBuf;

use scarforge_core::nrrd::save_nrrd;
use scarforge_core::phantom::{cardiac_phantom, PhantomSpec};

use crate::cmd::create_dir;
use crate::config::{vec3, PipelineConfig};
use crate::{Failure, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid size per axis.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Translation of the anatomy in voxels, as x,y,z.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    shift: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Amplitude of the smooth intensity texture.
    #[arg(long, default_value_t = 0.03)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(args: Args, mut config: PipelineConfig) -> Result<Status, Failure> {
    if args.out.is_some() {
        config.output_dir = args.out;
    }
    let out = config.output_dir()?;
    let spec = PhantomSpec {
        size: args.size,
        shift_voxels: match &args.shift {
            Some(s) => vec3(s, "--shift")?,
            None => [0.0; 3],
        },
        scale: args.scale,
        noise: args.noise,
        seed: args.seed,
    };
    let p = cardiac_phantom(&spec)?;
    create_dir(out)?;
    save_nrrd(&p.image, out.join("image.nrrd"))?;
    save_nrrd(&p.myocardium, out.join("myocardium.nrrd"))?;
    save_nrrd(&p.blood_pool, out.join("blood_pool.nrrd"))?;
    save_nrrd(&p.labels, out.join("labels.nrrd"))?;
    println!(
        "phantom {}^3 written to {} ({} myocardium voxels)",
        spec.size,
        out.display(),
        p.myocardium.count()
    );
    Ok(Status::Complete)
}
