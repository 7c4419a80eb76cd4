use std::path::{Path, PathBuf};

use rayon::prelude::*;

use scarforge_core::atlas::{load_atlas, AhaAtlas};
use scarforge_core::maskgen::{generate_scar_mask, to_subject_space, GeneratedScar, SubjectRegistration};
use scarforge_core::metrics::volume_ml;
use scarforge_core::nrrd::load_nrrd;
use scarforge_core::phantom::{cardiac_phantom, PhantomSpec};
use scarforge_core::rng::derive_seed;
use scarforge_core::Mask3;

use crate::cmd::{create_dir, partial_path, write_atomic};
use crate::config::{require_existing, PipelineConfig};
use crate::{Failure, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    out: Option<PathBuf>,
    /// AHA label volume of the template; the bundled phantom is used when
    /// absent.
    #[arg(long)]
    atlas: Option<PathBuf>,
    /// Template myocardium mask (default: nonzero atlas labels).
    #[arg(long)]
    myocardium: Option<PathBuf>,
    /// Map every scar into this subject myocardium.
    #[arg(long)]
    subject_myocardium: Option<PathBuf>,
    /// Scar already present in the subject, merged into each output.
    #[arg(long)]
    existing_scar: Option<PathBuf>,
    /// Number of masks to generate.
    #[arg(long, short = 'n')]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    regions: Option<usize>,
    /// Never place scar in the apex segment.
    #[arg(long)]
    exclude_apex: bool,
    /// Grid size of the bundled phantom template.
    #[arg(long, default_value_t = 64)]
    template_size: usize,
}

struct Template {
    atlas: AhaAtlas,
    myocardium: Mask3,
}

fn load_template(config: &PipelineConfig, template_size: usize) -> Result<Template, Failure> {
    match &config.atlas {
        Some(path) => {
            let atlas = load_atlas(load_nrrd::<u16>(path)?)?;
            let myocardium = match &config.myocardium {
                Some(m) => load_nrrd::<bool>(m)?,
                None => atlas.myocardium(),
            };
            Ok(Template { atlas, myocardium })
        }
        None => {
            let p = cardiac_phantom(&PhantomSpec {
                size: template_size,
                ..Default::default()
            })?;
            Ok(Template {
                atlas: p.atlas()?,
                myocardium: p.myocardium,
            })
        }
    }
}

struct Subject {
    myocardium: Mask3,
    existing: Option<Mask3>,
    registration: SubjectRegistration,
}

fn make_case(template: &Template, subject: Option<&Subject>, config: &PipelineConfig, seed: u64) -> scarforge_core::Result<GeneratedScar> {
    let spec = scarforge_core::maskgen::ScarSpec {
        seed,
        ..config.scar.clone()
    };
    let mut scar = generate_scar_mask(&template.atlas, &template.myocardium, &spec)?;
    if let Some(s) = subject {
        scar.mask = to_subject_space(&scar.mask, &template.myocardium, &s.myocardium, s.existing.as_ref(), &s.registration)?;
        scar.total_ml = volume_ml(&scar.mask);
        scar.warnings.push("mask mapped to subject space; region volumes refer to the template".into());
    }
    Ok(scar)
}

fn save_case(scar: &GeneratedScar, out: &Path, name: &str) -> scarforge_core::Result<()> {
    let target = out.join(format!("{name}.nrrd"));
    let tmp = partial_path(&target);
    scar.save(&tmp)?;
    let io = |p: &Path, e| scarforge_core::Error::Io {
        path: p.to_path_buf(),
        source: e,
    };
    std::fs::rename(tmp.with_extension("json"), out.join(format!("{name}.json"))).map_err(|e| io(&target, e))?;
    std::fs::rename(&tmp, &target).map_err(|e| io(&target, e))
}

fn manifest_row(case: usize, name: &str, scar: &GeneratedScar) -> String {
    let join = |f: &dyn Fn(&scarforge_core::maskgen::RegionRecord) -> String| {
        scar.regions.iter().map(f).collect::<Vec<_>>().join(";")
    };
    format!(
        "{case},{name}.nrrd,{},{},{},{},{},{},{},{}\n",
        scar.seed,
        scar.total_ml,
        join(&|r| r.segment.to_string()),
        join(&|r| r.requested_ml.to_string()),
        join(&|r| r.target_ml.to_string()),
        join(&|r| r.achieved_ml.to_string()),
        join(&|r| r.final_ml.to_string()),
        join(&|r| r.capped.to_string()),
    )
}

pub fn run(args: Args, mut config: PipelineConfig) -> Result<Status, Failure> {
    macro_rules! take {
        ($($field:ident),*) => {$( if args.$field.is_some() { config.$field = args.$field.clone(); } )*};
    }
    take!(atlas, myocardium, subject_myocardium, existing_scar, count, seed);
    if args.out.is_some() {
        config.output_dir = args.out.clone();
    }
    if let Some(r) = args.regions {
        config.scar.n_regions = r;
    }
    if args.exclude_apex {
        config.scar = config.scar.clone().without_apex();
    }
    let seed = config.seed()?;
    let count = config.count.unwrap_or(1);
    let out = config.output_dir()?.to_path_buf();
    config.scar.validate().map_err(|e| Failure::Config(e.to_string()))?;
    if config.existing_scar.is_some() && config.subject_myocardium.is_none() {
        return Err(Failure::Config("--existing-scar needs --subject-myocardium".into()));
    }
    require_existing(
        [&config.atlas, &config.myocardium, &config.subject_myocardium, &config.existing_scar]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path),
    )?;

    let template = load_template(&config, args.template_size)?;
    let subject = match &config.subject_myocardium {
        Some(path) => Some(Subject {
            myocardium: load_nrrd::<bool>(path)?,
            existing: config.existing_scar.as_ref().map(load_nrrd::<bool>).transpose()?,
            registration: SubjectRegistration {
                order: config.registration_order,
                demons: config.demons.clone(),
                rigid: config.rigid.clone(),
            },
        }),
        None => None,
    };
    create_dir(&out)?;

    let results: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let case_seed = derive_seed(seed, i as u64);
            let name = format!("scar_{i:04}");
            let r = make_case(&template, subject.as_ref(), &config, case_seed).and_then(|scar| {
                save_case(&scar, &out, &name)?;
                Ok(scar)
            });
            (i, case_seed, name, r)
        })
        .collect();

    let mut manifest =
        String::from("case,file,seed,total_ml,segments,requested_ml,target_ml,achieved_ml,final_ml,capped\n");
    let mut failed = 0;
    for (i, case_seed, name, r) in &results {
        match r {
            Ok(scar) => {
                manifest.push_str(&manifest_row(*i, name, scar));
                for w in &scar.warnings {
                    eprintln!("case {i}: {w}");
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("case {i} (seed {case_seed}) failed: {e}");
            }
        }
    }
    write_atomic(&out.join("manifest.csv"), &manifest)?;
    println!("generated {} of {count} masks in {}", count - failed, out.display());
    Ok(if failed == 0 { Status::Complete } else { Status::Partial })
}
