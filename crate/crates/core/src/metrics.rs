//! Overlap metrics, segmentation losses and scar volume statistics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atlas::BullseyeTable;
use crate::error::{Error, Result};
use crate::volume::{Mask3, Volume3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

pub fn confusion(pred: &Mask3, gt: &Mask3) -> Result<ConfusionCounts> {
    pred.geometry().ensure_matches(gt.geometry(), "confusion")?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `num / den`, with `0/0` read as a vacuous success.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// `2TP / (2TP + FP + FN)`; two empty masks score 1.
pub fn dice(c: &ConfusionCounts) -> f64 {
    ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

/// `TP / (TP + FP)`; an empty prediction of an empty truth scores 1, of a
/// non-empty truth 0.
pub fn precision(c: &ConfusionCounts) -> f64 {
    if c.tp + c.fp == 0 {
        return if c.fn_ == 0 { 1.0 } else { 0.0 };
    }
    ratio(c.tp, c.tp + c.fp)
}

/// `TP / (TP + FN)`; an empty truth scores 1 if nothing was predicted and 0
/// otherwise.
pub fn sensitivity(c: &ConfusionCounts) -> f64 {
    if c.tp + c.fn_ == 0 {
        return if c.fp == 0 { 1.0 } else { 0.0 };
    }
    ratio(c.tp, c.tp + c.fn_)
}

/// `TN / (TN + FP)`; 1 when there are no negatives.
pub fn specificity(c: &ConfusionCounts) -> f64 {
    ratio(c.tn, c.tn + c.fp)
}

/// Per-voxel foreground probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftPrediction(Volume3);

impl SoftPrediction {
    pub fn new(p: Volume3) -> Result<Self> {
        if let Some(v) = p.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("probability {v} outside [0, 1]")));
        }
        Ok(SoftPrediction(p))
    }

    pub fn from_mask(m: &Mask3) -> Self {
        SoftPrediction(m.map(|b| if b { 1.0 } else { 0.0 }))
    }

    pub fn volume(&self) -> &Volume3 {
        &self.0
    }
}

/// `1 − (2Σp·g + ε) / (Σp + Σg + ε)`.
pub fn soft_dice_loss(p: &SoftPrediction, gt: &Mask3, smooth: f64) -> Result<f64> {
    p.0.geometry().ensure_matches(gt.geometry(), "soft_dice_loss")?;
    let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
    for (&v, &g) in p.0.data().iter().zip(gt.data()) {
        sp += v;
        if g {
            inter += v;
            sg += 1.0;
        }
    }
    Ok(1.0 - (2.0 * inter + smooth) / (sp + sg + smooth))
}

/// Class weights and clamping for the weighted cross entropy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WceParams {
    /// Foreground weight; `None` uses `N_bg / N_fg` of the case (1 when the
    /// truth is empty).
    pub w_fg: Option<f64>,
    pub w_bg: f64,
    pub delta: f64,
}

impl Default for WceParams {
    fn default() -> Self {
        WceParams {
            w_fg: None,
            w_bg: 1.0,
            delta: 1e-7,
        }
    }
}

/// Unweighted foreground and background parts of the cross entropy:
/// `−Σ_g log p / N` and `−Σ_{¬g} log(1 − p) / N`, with `p` clamped to
/// `[δ, 1 − δ]`.
pub fn wce_terms(p: &SoftPrediction, gt: &Mask3, delta: f64) -> Result<(f64, f64)> {
    p.0.geometry().ensure_matches(gt.geometry(), "weighted_cross_entropy")?;
    if !(delta >= 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!("clamp delta must be in [0, 0.5), got {delta}")));
    }
    let (mut fg, mut bg) = (0.0, 0.0);
    for (&v, &g) in p.0.data().iter().zip(gt.data()) {
        let v = v.clamp(delta, 1.0 - delta);
        if g {
            fg -= v.ln();
        } else {
            bg -= (1.0 - v).ln();
        }
    }
    let n = gt.len() as f64;
    Ok((fg / n, bg / n))
}

pub fn weighted_cross_entropy(p: &SoftPrediction, gt: &Mask3, params: &WceParams) -> Result<f64> {
    let w_fg = match params.w_fg {
        Some(w) => w,
        None => {
            let n_fg = gt.count();
            if n_fg == 0 {
                1.0
            } else {
                (gt.len() - n_fg) as f64 / n_fg as f64
            }
        }
    };
    if !(w_fg > 0.0 && params.w_bg > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "class weights must be positive, got {w_fg} and {}",
            params.w_bg
        )));
    }
    let (fg, bg) = wce_terms(p, gt, params.delta)?;
    Ok(w_fg * fg + params.w_bg * bg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegLossParams {
    pub dice_smooth: f64,
    pub wce: WceParams,
}

impl Default for SegLossParams {
    fn default() -> Self {
        SegLossParams {
            dice_smooth: 1e-5,
            wce: WceParams::default(),
        }
    }
}

/// Soft Dice plus weighted cross entropy.
pub fn seg_loss(p: &SoftPrediction, gt: &Mask3, params: &SegLossParams) -> Result<f64> {
    Ok(soft_dice_loss(p, gt, params.dice_smooth)? + weighted_cross_entropy(p, gt, &params.wce)?)
}

/// Foreground volume in millilitres.
pub fn volume_ml(m: &Mask3) -> f64 {
    m.count() as f64 * m.geometry().voxel_volume_mm3() / 1000.0
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("statistics of an empty list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

pub fn cohort_volume_stats(masks: &[Mask3]) -> Result<(f64, f64)> {
    mean_std(&masks.iter().map(volume_ml).collect::<Vec<_>>())
}

/// Per-segment `pred − gt`.
pub fn bullseye_diff(pred: &BullseyeTable, gt: &BullseyeTable) -> BullseyeTable {
    pred.difference(gt)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub dice: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Predicted scar volume.
    pub volume_ml: f64,
    pub gt_volume_ml: f64,
    pub counts: ConfusionCounts,
}

pub fn evaluate_case(case_id: &str, pred: &Mask3, gt: &Mask3) -> Result<CaseMetrics> {
    let counts = confusion(pred, gt)?;
    Ok(CaseMetrics {
        case_id: case_id.to_string(),
        dice: dice(&counts),
        precision: precision(&counts),
        sensitivity: sensitivity(&counts),
        specificity: specificity(&counts),
        volume_ml: volume_ml(pred),
        gt_volume_ml: volume_ml(gt),
        counts,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub dice: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl MetricSet {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        MetricSet {
            dice: dice(c),
            precision: precision(c),
            sensitivity: sensitivity(c),
            specificity: specificity(c),
        }
    }
}

/// Cohort aggregate: metrics averaged over cases and recomputed from pooled
/// voxel counts, plus scar volume mean ± population std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub cases: usize,
    pub mean_over_cases: MetricSet,
    pub pooled: MetricSet,
    pub pred_volume_ml: (f64, f64),
    pub gt_volume_ml: (f64, f64),
}

pub fn summarize(cases: &[CaseMetrics]) -> Result<CohortSummary> {
    if cases.is_empty() {
        return Err(Error::InvalidParameter("cohort has no cases".into()));
    }
    let n = cases.len() as f64;
    let avg = |f: fn(&CaseMetrics) -> f64| cases.iter().map(f).sum::<f64>() / n;
    let pooled = cases.iter().map(|c| c.counts).fold(ConfusionCounts::default(), |a, b| a + b);
    Ok(CohortSummary {
        cases: cases.len(),
        mean_over_cases: MetricSet {
            dice: avg(|c| c.dice),
            precision: avg(|c| c.precision),
            sensitivity: avg(|c| c.sensitivity),
            specificity: avg(|c| c.specificity),
        },
        pooled: MetricSet::from_counts(&pooled),
        pred_volume_ml: mean_std(&cases.iter().map(|c| c.volume_ml).collect::<Vec<_>>())?,
        gt_volume_ml: mean_std(&cases.iter().map(|c| c.gt_volume_ml).collect::<Vec<_>>())?,
    })
}

impl CohortSummary {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// CSV with header `case_id,dice,precision,sensitivity,specificity,volume_ml`.
pub fn cases_to_csv(cases: &[CaseMetrics]) -> String {
    let mut out = String::from("case_id,dice,precision,sensitivity,specificity,volume_ml\n");
    for c in cases {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.case_id, c.dice, c.precision, c.sensitivity, c.specificity, c.volume_ml
        ));
    }
    out
}

pub fn save_cases_csv(cases: &[CaseMetrics], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(cases_to_csv(cases).as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::volume::Geometry;
    use proptest::prelude::*;
    use rand::Rng;

    fn g(n: usize) -> Geometry {
        Geometry::new([n, n, n], [1.0; 3]).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let all = Mask3::filled(g(2), true);
        assert_eq!(
            confusion(&all, &all).unwrap(),
            ConfusionCounts { tp: 8, fp: 0, fn_: 0, tn: 0 }
        );
        let geom = Geometry::new([5, 1, 1], [1.0; 3]).unwrap();
        let c = confusion(&Mask3::filled(geom, false), &Mask3::filled(geom, true)).unwrap();
        assert_eq!(c.fn_, 5);
        assert!(confusion(&all, &Mask3::filled(g(3), true)).is_err());
    }

    #[test]
    fn metric_examples() {
        let a = Mask3::from_fn(g(4), |x, y, z| x < 2 && y < 2 && z < 2);
        let same = confusion(&a, &a).unwrap();
        assert_eq!((dice(&same), precision(&same), sensitivity(&same)), (1.0, 1.0, 1.0));
        let b = Mask3::from_fn(g(4), |x, y, z| x >= 2 && y < 2 && z < 2);
        assert_eq!(dice(&confusion(&a, &b).unwrap()), 0.0);
        let half = Mask3::from_fn(g(4), |x, y, z| (1..3).contains(&x) && y < 2 && z < 2);
        assert_eq!(dice(&confusion(&a, &half).unwrap()), 0.5);
    }

    #[test]
    fn empty_conventions() {
        let e = Mask3::filled(g(3), false);
        let f = Mask3::from_fn(g(3), |x, _, _| x == 0);
        let both = confusion(&e, &e).unwrap();
        assert_eq!([dice(&both), precision(&both), sensitivity(&both), specificity(&both)], [1.0; 4]);
        let missed = confusion(&e, &f).unwrap();
        assert_eq!([dice(&missed), precision(&missed), sensitivity(&missed)], [0.0; 3]);
        let spurious = confusion(&f, &e).unwrap();
        assert_eq!([dice(&spurious), precision(&spurious), sensitivity(&spurious)], [0.0; 3]);
    }

    #[test]
    fn soft_dice_examples() {
        let gt = Mask3::from_fn(g(4), |x, _, _| x < 2);
        let hard = SoftPrediction::from_mask(&gt);
        assert!(soft_dice_loss(&hard, &gt, 1e-5).unwrap().abs() < 1e-5);
        let inv = SoftPrediction::from_mask(&gt.not());
        assert!((soft_dice_loss(&inv, &gt, 1e-5).unwrap() - 1.0).abs() < 1e-5);
        let half = SoftPrediction::new(Volume3::filled(g(4), 0.5)).unwrap();
        let eps = 1e-5;
        let expected = 1.0 - (2.0 * 16.0 + eps) / (32.0 + 32.0 + eps);
        assert!((soft_dice_loss(&half, &gt, eps).unwrap() - expected).abs() < 1e-9);
        assert!(SoftPrediction::new(Volume3::filled(g(2), 1.5)).is_err());
    }

    #[test]
    fn soft_dice_tends_to_hard_dice() {
        let a = Mask3::from_fn(g(6), |x, y, _| x + y < 5);
        let b = Mask3::from_fn(g(6), |x, y, _| x < 3 && y < 4);
        let d = dice(&confusion(&b, &a).unwrap());
        let p = SoftPrediction::from_mask(&b);
        let coarse = soft_dice_loss(&p, &a, 1e-5).unwrap();
        let fine = soft_dice_loss(&p, &a, 1e-8).unwrap();
        assert!((fine - (1.0 - d)).abs() <= (coarse - (1.0 - d)).abs());
        assert!((fine - (1.0 - d)).abs() < 1e-8);
    }

    #[test]
    fn wce_examples() {
        let gt = Mask3::from_fn(g(4), |x, _, _| x == 0);
        let perfect = SoftPrediction::from_mask(&gt);
        let ones = WceParams {
            w_fg: Some(1.0),
            ..Default::default()
        };
        assert!(weighted_cross_entropy(&perfect, &gt, &ones).unwrap() < 1e-6);
        let half = SoftPrediction::new(Volume3::filled(g(4), 0.5)).unwrap();
        assert!((weighted_cross_entropy(&half, &gt, &ones).unwrap() - 2f64.ln()).abs() < 1e-9);
        let (fg, bg) = wce_terms(&half, &gt, 1e-7).unwrap();
        let two = WceParams {
            w_fg: Some(2.0),
            ..Default::default()
        };
        let diff = weighted_cross_entropy(&half, &gt, &two).unwrap() - weighted_cross_entropy(&half, &gt, &ones).unwrap();
        assert!((diff - fg).abs() < 1e-15);
        let auto = weighted_cross_entropy(&half, &gt, &WceParams::default()).unwrap();
        assert!((auto - (3.0 * fg + bg)).abs() < 1e-12);
        let bad = WceParams {
            w_fg: Some(0.0),
            ..Default::default()
        };
        assert!(weighted_cross_entropy(&half, &gt, &bad).is_err());
    }

    #[test]
    fn seg_loss_is_sum_and_grows_when_degraded() {
        let gt = Mask3::from_fn(g(5), |x, y, _| x < 3 && y > 1);
        let params = SegLossParams::default();
        let perfect = SoftPrediction::from_mask(&gt);
        let base = seg_loss(&perfect, &gt, &params).unwrap();
        let mut rng = rng_from_seed(8);
        let noisy = SoftPrediction::new(Volume3::from_fn(g(5), |_, _, _| rng.random_range(0.0..1.0))).unwrap();
        let total = seg_loss(&noisy, &gt, &params).unwrap();
        let parts = soft_dice_loss(&noisy, &gt, params.dice_smooth).unwrap()
            + weighted_cross_entropy(&noisy, &gt, &params.wce).unwrap();
        assert_eq!(total, parts);
        let mut v = perfect.volume().clone();
        v.set(0, 2, 0, 0.6);
        v.set(4, 4, 4, 0.3);
        let worse = seg_loss(&SoftPrediction::new(v).unwrap(), &gt, &params).unwrap();
        assert!(worse > base);
    }

    #[test]
    fn volume_examples() {
        assert_eq!(volume_ml(&Mask3::filled(g(10), true)), 1.0);
        assert_eq!(volume_ml(&Mask3::filled(g(10), false)), 0.0);
        let geom = Geometry::new([59, 1, 1], [1.25, 1.25, 10.0]).unwrap();
        assert_eq!(volume_ml(&Mask3::filled(geom, true)), 0.921875);
    }

    #[test]
    fn cohort_examples() {
        let one = Mask3::from_fn(g(10), |x, _, _| x < 1);
        assert_eq!(cohort_volume_stats(&[one.clone()]).unwrap(), (0.1, 0.0));
        assert_eq!(mean_std(&[1.0, 3.0]).unwrap(), (2.0, 1.0));
        assert!(cohort_volume_stats(&[]).is_err());
        let mut rng = rng_from_seed(11);
        let draws: Vec<f64> = (0..10_000).map(|_| rng.random_range(2.0..40.0)).collect();
        let (mean, _) = mean_std(&draws).unwrap();
        assert!((mean - 21.0).abs() < 0.5);
    }

    #[test]
    fn bullseye_diff_examples() {
        let mut v = [0.0; 17];
        for (i, x) in v.iter_mut().enumerate() {
            *x = i as f64 * 0.5;
        }
        let gt = BullseyeTable::new(v, 0.0);
        assert!(bullseye_diff(&gt, &gt).values.iter().all(|&d| d == 0.0));
        let mut w = v;
        w[8] += 1.0;
        let d = bullseye_diff(&BullseyeTable::new(w, 0.0), &gt);
        assert_eq!(d.values.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(d.get(9).unwrap(), 1.0);
        assert_eq!(d.total, 1.0);
    }

    #[test]
    fn summary_and_csv() {
        let a = Mask3::from_fn(g(4), |x, _, _| x < 2);
        let b = Mask3::from_fn(g(4), |x, _, _| x < 1);
        let cases = vec![evaluate_case("p1", &a, &a).unwrap(), evaluate_case("p2", &b, &a).unwrap()];
        let s = summarize(&cases).unwrap();
        assert_eq!(s.cases, 2);
        assert!((s.mean_over_cases.dice - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((s.pooled.dice - 2.0 * 48.0 / (48.0 + 64.0)).abs() < 1e-12);
        let csv = cases_to_csv(&cases);
        assert!(csv.starts_with("case_id,dice,precision,sensitivity,specificity,volume_ml\np1,1,1,1,1,0.032\n"));
    }

    proptest! {
        #[test]
        fn metrics_bounded_and_f1(seed in any::<u64>(), pa in 0.0f64..1.0, pb in 0.0f64..1.0) {
            let mut rng = rng_from_seed(seed);
            let a = Mask3::from_fn(g(6), |_, _, _| rng.random_bool(pa));
            let b = Mask3::from_fn(g(6), |_, _, _| rng.random_bool(pb));
            let c = confusion(&a, &b).unwrap();
            prop_assert_eq!(c.total(), 216);
            let (d, p, s, sp) = (dice(&c), precision(&c), sensitivity(&c), specificity(&c));
            for m in [d, p, s, sp] {
                prop_assert!((0.0..=1.0).contains(&m));
            }
            if p + s > 0.0 && c.tp + c.fp > 0 && c.tp + c.fn_ > 0 {
                prop_assert!((d - 2.0 * p * s / (p + s)).abs() < 1e-12);
            }
            prop_assert_eq!(d == 1.0, a == b);
        }

        #[test]
        fn volume_is_additive(seed in any::<u64>()) {
            let geom = Geometry::new([7, 5, 3], [0.7, 1.3, 2.9]).unwrap();
            let mut rng = rng_from_seed(seed);
            let labels: Vec<u8> = (0..geom.len()).map(|_| rng.random_range(0..3)).collect();
            let a = Mask3::new(geom, labels.iter().map(|&l| l == 1).collect()).unwrap();
            let b = Mask3::new(geom, labels.iter().map(|&l| l == 2).collect()).unwrap();
            let u = a.or(&b).unwrap();
            let lhs = volume_ml(&u);
            let rhs = (a.count() + b.count()) as f64 * geom.voxel_volume_mm3() / 1000.0;
            prop_assert_eq!(lhs, rhs);
        }
    }
}
