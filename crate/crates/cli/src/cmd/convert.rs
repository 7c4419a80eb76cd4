use std::path::PathBuf;

use clap::ValueEnum;

use scarforge_core::nrrd::{load_nrrd, save_nrrd, NrrdVoxel};
use scarforge_core::preprocess::{reorient, rescale_intensity, resample, zscore_normalize, Interp};
use scarforge_core::{Grid, Orientation};

use crate::config::{vec3, PipelineConfig};
use crate::{Failure, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Continuous intensities.
    Image,
    /// Binary mask.
    Mask,
    /// Integer labels.
    Labels,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Normalize {
    None,
    Zscore,
    /// Rescale to [0, 1].
    Minmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Nearest,
    Trilinear,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    input: PathBuf,
    /// Output file name, placed in the output directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Kind::Image)]
    kind: Kind,
    /// Target axis code such as +x+y+z or -y+x+z.
    #[arg(long, allow_hyphen_values = true)]
    reorient: Option<String>,
    /// Target spacing in mm, as sx,sy,sz.
    #[arg(long, value_delimiter = ',')]
    spacing: Option<Vec<f64>>,
    /// Interpolation for image resampling; masks and labels always use
    /// nearest neighbour.
    #[arg(long, value_enum, default_value_t = InterpArg::Trilinear)]
    interp: InterpArg,
    #[arg(long, value_enum, default_value_t = Normalize::None)]
    normalize: Normalize,
}

fn geometric<T: NrrdVoxel>(v: Grid<T>, args: &Args, interp: Interp) -> Result<Grid<T>, Failure> {
    let v = match &args.reorient {
        Some(code) => reorient(&v, code.parse::<Orientation>()?)?,
        None => v,
    };
    Ok(match &args.spacing {
        Some(s) => resample(&v, vec3(s, "--spacing")?, interp)?,
        None => v,
    })
}

pub fn run(args: Args, mut config: PipelineConfig) -> Result<Status, Failure> {
    if args.out.is_some() {
        config.output_dir = args.out.clone();
    }
    let out = config.output_dir()?;
    crate::config::require_existing([args.input.as_path()])?;
    let interp = match args.interp {
        InterpArg::Nearest => Interp::Nearest,
        InterpArg::Trilinear => Interp::Trilinear,
    };
    if args.kind != Kind::Image && args.normalize != Normalize::None {
        return Err(Failure::Config("intensity normalisation only applies to images".into()));
    }
    crate::cmd::create_dir(out)?;
    let target = out.join(&args.output);
    match args.kind {
        Kind::Image => {
            let v = geometric(load_nrrd::<f64>(&args.input)?, &args, interp)?;
            let v = match args.normalize {
                Normalize::None => v,
                Normalize::Zscore => zscore_normalize(&v),
                Normalize::Minmax => rescale_intensity(&v, 0.0, 1.0),
            };
            save_nrrd(&v, &target)?;
        }
        Kind::Mask => save_nrrd(&geometric(load_nrrd::<bool>(&args.input)?, &args, Interp::Nearest)?, &target)?,
        Kind::Labels => save_nrrd(&geometric(load_nrrd::<u16>(&args.input)?, &args, Interp::Nearest)?, &target)?,
    }
    println!("wrote {}", target.display());
    Ok(Status::Complete)
}
