use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use scarforge_core::atlas::{bullseye_svg, load_atlas, segment_volumes, AhaAtlas, BullseyeTable};
use scarforge_core::metrics::{bullseye_diff, cases_to_csv, evaluate_case, summarize, CaseMetrics};
use scarforge_core::nrrd::load_nrrd;
use scarforge_core::Mask3;

use crate::cmd::{create_dir, to_json, write_atomic};
use crate::config::{require_existing, PipelineConfig};
use crate::{Failure, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of predicted masks, one `<case>.nrrd` per case.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth masks with matching file names.
    #[arg(long)]
    gt: PathBuf,
    /// AHA label volume for bull's-eye reports.
    #[arg(long)]
    atlas: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn case_ids(dir: &Path) -> Result<BTreeSet<String>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Config(format!("cannot list {}: {e}", dir.display())))?;
    let mut ids = BTreeSet::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Failure::Config(format!("cannot list {}: {e}", dir.display())))?
            .path();
        if path.extension().is_some_and(|e| e == "nrrd") {
            if let Some(stem) = path.file_stem() {
                ids.insert(stem.to_string_lossy().into_owned());
            }
        }
    }
    Ok(ids)
}

struct Scored {
    metrics: CaseMetrics,
    tables: Option<(BullseyeTable, BullseyeTable)>,
}

fn score(id: &str, pred_dir: &Path, gt_dir: &Path, atlas: Option<&AhaAtlas>) -> scarforge_core::Result<Scored> {
    let pred: Mask3 = load_nrrd(pred_dir.join(format!("{id}.nrrd")))?;
    let gt: Mask3 = load_nrrd(gt_dir.join(format!("{id}.nrrd")))?;
    let metrics = evaluate_case(id, &pred, &gt)?;
    let tables = match atlas {
        Some(a) => Some((segment_volumes(&pred, a)?, segment_volumes(&gt, a)?)),
        None => None,
    };
    Ok(Scored { metrics, tables })
}

pub fn run(args: Args, mut config: PipelineConfig) -> Result<Status, Failure> {
    if args.out.is_some() {
        config.output_dir = args.out.clone();
    }
    if args.atlas.is_some() {
        config.atlas = args.atlas.clone();
    }
    let out = config.output_dir()?.to_path_buf();
    require_existing([args.pred.as_path(), args.gt.as_path()])?;
    require_existing(config.atlas.iter().map(PathBuf::as_path))?;
    let atlas = config
        .atlas
        .as_ref()
        .map(|p| load_nrrd::<u16>(p).and_then(load_atlas))
        .transpose()?;

    let pred_ids = case_ids(&args.pred)?;
    let gt_ids = case_ids(&args.gt)?;
    let mut partial = false;
    for id in pred_ids.difference(&gt_ids) {
        eprintln!("case {id}: no ground truth");
        partial = true;
    }
    for id in gt_ids.difference(&pred_ids) {
        eprintln!("case {id}: no prediction");
        partial = true;
    }
    let matched: Vec<&String> = pred_ids.intersection(&gt_ids).collect();
    let results: Vec<_> = matched
        .par_iter()
        .map(|id| (id, score(id, &args.pred, &args.gt, atlas.as_ref())))
        .collect();

    let mut scored = Vec::new();
    for (id, r) in results {
        match r {
            Ok(s) => scored.push(s),
            Err(e) => {
                eprintln!("case {id}: {e}");
                partial = true;
            }
        }
    }
    create_dir(&out)?;
    let metrics: Vec<CaseMetrics> = scored.iter().map(|s| s.metrics.clone()).collect();
    write_atomic(&out.join("metrics.csv"), &cases_to_csv(&metrics))?;
    if metrics.is_empty() {
        eprintln!("no case could be evaluated");
        return Ok(Status::Partial);
    }
    let summary = summarize(&metrics)?;
    write_atomic(&out.join("cohort.json"), &to_json(&summary)?)?;

    if atlas.is_some() {
        let preds: Vec<BullseyeTable> = scored.iter().filter_map(|s| s.tables.as_ref()).map(|t| t.0.clone()).collect();
        let gts: Vec<BullseyeTable> = scored.iter().filter_map(|s| s.tables.as_ref()).map(|t| t.1.clone()).collect();
        let pred_mean = BullseyeTable::mean(&preds).unwrap_or_else(BullseyeTable::zeros);
        let gt_mean = BullseyeTable::mean(&gts).unwrap_or_else(BullseyeTable::zeros);
        let diff = bullseye_diff(&pred_mean, &gt_mean);
        for (name, table, title) in [
            ("pred", &pred_mean, "Predicted scar volume (mL)"),
            ("gt", &gt_mean, "Ground-truth scar volume (mL)"),
            ("diff", &diff, "Volume difference, predicted minus ground truth (mL)"),
        ] {
            bullseye_svg(table, out.join(format!("bullseye_{name}.svg")), Some(title))?;
            table.save_csv(out.join(format!("bullseye_{name}.csv")))?;
        }
    }
    let m = &summary.mean_over_cases;
    println!(
        "{} cases: dice {:.4}, precision {:.4}, sensitivity {:.4}, specificity {:.4} (pooled dice {:.4})",
        summary.cases, m.dice, m.precision, m.sensitivity, m.specificity, summary.pooled.dice
    );
    Ok(if partial { Status::Partial } else { Status::Complete })
}
