use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;

use scarforge_core::diffusion::{
    lesion_histogram, make_schedule, synthesize, FileExchangePredictor, GaussianPredictor, LesionHistogram,
    NoisePredictor, OraclePredictor, ScheduleConfig, Stepping, SynthesisOptions, ZeroPredictor,
};
use scarforge_core::nrrd::{load_nrrd, save_nrrd};
use scarforge_core::rng::{derive_seed, rng_from_seed};
use scarforge_core::{Mask3, Volume3};

use crate::cmd::{create_dir, to_json, write_atomic};
use crate::config::{require_existing, PipelineConfig};
use crate::{Failure, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    /// Predicts zero noise.
    Zero,
    /// Predicts standard normal noise.
    Stub,
    /// Exact noise implied by a target image (`--target`).
    Oracle,
    /// An external program (`--command`), exchanging NRRD files.
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SteppingArg {
    Ancestral,
    Deterministic,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    image: PathBuf,
    /// Scar region to inpaint.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Diffusion steps; the default β range is rescaled to this length.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum, default_value_t = PredictorKind::Stub)]
    predictor: PredictorKind,
    #[arg(long)]
    target: Option<PathBuf>,
    /// Program run once per step by the external predictor.
    #[arg(long)]
    command: Option<PathBuf>,
    /// Argument passed to the external program (repeatable).
    #[arg(long = "arg", allow_hyphen_values = true)]
    command_args: Vec<String>,
    #[arg(long, value_enum, default_value_t = SteppingArg::Ancestral)]
    stepping: SteppingArg,
    /// Conditioning histogram JSON; computed from the masked image when
    /// absent.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Report {
    seed: u64,
    steps: usize,
    predictor: PredictorKind,
    scar_voxels: usize,
    background_voxels: usize,
    background_mismatches: usize,
    audit_passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    mae_vs_target: Option<f64>,
}

fn histogram(args: &Args, config: &PipelineConfig, image: &Volume3, mask: &Mask3) -> Result<LesionHistogram, Failure> {
    if let Some(p) = &args.histogram {
        return Ok(LesionHistogram::load_json(p)?);
    }
    let bins = args.bins.or(config.histogram_bins).unwrap_or(32);
    if mask.is_all_background() {
        // nothing to describe; pass a neutral payload
        return Ok(LesionHistogram {
            edges: vec![0.0, 1.0],
            masses: vec![1.0],
        });
    }
    Ok(lesion_histogram(image, mask, bins)?)
}

pub fn run(args: Args, mut config: PipelineConfig) -> Result<Status, Failure> {
    if args.out.is_some() {
        config.output_dir = args.out.clone();
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    let seed = config.seed()?;
    let out = config.output_dir()?.to_path_buf();
    let schedule_config = match (args.steps, config.schedule) {
        (Some(steps), _) => ScheduleConfig::scaled_linear(steps),
        (None, Some(c)) => c,
        (None, None) => ScheduleConfig::default(),
    };
    let schedule = make_schedule(schedule_config).map_err(|e| Failure::Config(e.to_string()))?;
    require_existing([args.image.as_path(), args.mask.as_path()])?;
    require_existing(args.target.iter().chain(&args.histogram).map(PathBuf::as_path))?;

    let image: Volume3 = load_nrrd(&args.image)?;
    let mask: Mask3 = load_nrrd(&args.mask)?;
    image.geometry().ensure_same_dims(mask.geometry(), "image and mask")?;
    let target = args.target.as_ref().map(load_nrrd::<f64>).transpose()?;
    let mut predictor: Box<dyn NoisePredictor> = match args.predictor {
        PredictorKind::Zero => Box::new(ZeroPredictor),
        PredictorKind::Stub => Box::new(GaussianPredictor::new(rng_from_seed(derive_seed(seed, 1)))),
        PredictorKind::Oracle => {
            let t = target
                .clone()
                .ok_or_else(|| Failure::Config("the oracle predictor needs --target".into()))?;
            image.geometry().ensure_same_dims(t.geometry(), "image and target")?;
            Box::new(OraclePredictor::new(t, schedule.clone()))
        }
        PredictorKind::External => {
            let program = args
                .command
                .clone()
                .ok_or_else(|| Failure::Config("the external predictor needs --command".into()))?;
            Box::new(FileExchangePredictor::new(program, args.command_args.clone(), out.join("exchange")))
        }
    };
    let hist = histogram(&args, &config, &image, &mask)?;
    let options = SynthesisOptions {
        stepping: match args.stepping {
            SteppingArg::Ancestral => Stepping::Ancestral,
            SteppingArg::Deterministic => Stepping::Deterministic,
        },
    };
    create_dir(&out)?;
    let mut rng = rng_from_seed(seed);
    let result = synthesize(&image, &mask, predictor.as_mut(), &schedule, &hist, &mut rng, options)?;
    save_nrrd(&result, out.join("synthetic.nrrd"))?;

    let mut mismatches = 0;
    let mut abs_err = 0.0;
    for i in 0..result.len() {
        if mask.data()[i] {
            if let Some(t) = &target {
                abs_err += (result.data()[i] - t.data()[i]).abs();
            }
        } else if result.data()[i].to_bits() != image.data()[i].to_bits() {
            mismatches += 1;
        }
    }
    let scar_voxels = mask.count();
    let report = Report {
        seed,
        steps: schedule.steps(),
        predictor: args.predictor,
        scar_voxels,
        background_voxels: mask.len() - scar_voxels,
        background_mismatches: mismatches,
        audit_passed: mismatches == 0,
        mae_vs_target: target.as_ref().filter(|_| scar_voxels > 0).map(|_| abs_err / scar_voxels as f64),
    };
    write_atomic(&out.join("synth_report.json"), &to_json(&report)?)?;
    println!(
        "background audit: {} ({} of {} voxels differ)",
        if report.audit_passed { "passed" } else { "FAILED" },
        mismatches,
        report.background_voxels
    );
    if let Some(mae) = report.mae_vs_target {
        println!("scar-region MAE vs target: {mae:.3e}");
    }
    if !report.audit_passed {
        return Err(Failure::Audit(format!("{mismatches} background voxels changed")));
    }
    Ok(Status::Complete)
}
