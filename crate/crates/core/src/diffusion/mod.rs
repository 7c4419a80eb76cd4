//! DDPM machinery for scar inpainting: the noise schedule, the forward
//! process, the scar-focused noise loss, histogram conditioning and the
//! mask-blended reverse sampler.

mod predictor;
mod sampler;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use predictor::{FileExchangePredictor, GaussianPredictor, NoisePredictor, OraclePredictor, ZeroPredictor};
pub use sampler::{ancestral_step, synthesize, Stepping, SynthesisOptions};

use crate::error::{Error, Result};
use crate::volume::{Mask3, Volume3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Linear,
}

/// Parameters from which a schedule is built; this is also its JSON form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub kind: ScheduleKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            kind: ScheduleKind::Linear,
        }
    }
}

impl ScheduleConfig {
    /// The default linear range rescaled to `steps` steps (β multiplied by
    /// `1000 / steps`), so short schedules still reach a small ᾱ_T.
    pub fn scaled_linear(steps: usize) -> Self {
        let scale = 1000.0 / steps.max(1) as f64;
        ScheduleConfig {
            steps,
            beta_start: 1e-4 * scale,
            beta_end: (0.02 * scale).min(0.999),
            kind: ScheduleKind::Linear,
        }
    }
}

/// Variance schedule with `β_t` for `t ∈ 1..=T`, `α_t = 1 − β_t` and
/// `ᾱ_t = Π_{s ≤ t} α_s`, `ᾱ_0 = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleConfig", into = "ScheduleConfig")]
pub struct NoiseSchedule {
    config: ScheduleConfig,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl TryFrom<ScheduleConfig> for NoiseSchedule {
    type Error = Error;

    fn try_from(c: ScheduleConfig) -> Result<Self> {
        make_schedule(c)
    }
}

impl From<NoiseSchedule> for ScheduleConfig {
    fn from(s: NoiseSchedule) -> Self {
        s.config
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_schedule(ScheduleConfig::default()).expect("default schedule is valid")
    }
}

pub fn make_schedule(config: ScheduleConfig) -> Result<NoiseSchedule> {
    let ScheduleConfig {
        steps,
        beta_start,
        beta_end,
        kind: ScheduleKind::Linear,
    } = config;
    if steps == 0 || !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "schedule needs T >= 1 and 0 < beta_start <= beta_end < 1, got {config:?}"
        )));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let mut alpha_bars = Vec::with_capacity(steps + 1);
    alpha_bars.push(1.0);
    for b in &betas {
        let prev = *alpha_bars.last().expect("seeded with 1");
        alpha_bars.push(prev * (1.0 - b));
    }
    Ok(NoiseSchedule {
        config,
        betas,
        alpha_bars,
    })
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    /// `β_t` for `1 ≤ t ≤ T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta(t)
    }

    /// `ᾱ_t` for `0 ≤ t ≤ T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t > self.steps() {
            return Err(Error::InvalidParameter(format!("timestep {t} outside 0..={}", self.steps())));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn ensure_same_dims(a: &Volume3, b: &Volume3, what: &str) -> Result<()> {
    a.geometry().ensure_same_dims(b.geometry(), what)
}

/// `x_t = √ᾱ_t · x0 + √(1 − ᾱ_t) · ε`; `t = 0` returns `x0` unchanged.
pub fn forward_diffuse(x0: &Volume3, t: usize, eps: &Volume3, sched: &NoiseSchedule) -> Result<Volume3> {
    sched.check_t(t)?;
    ensure_same_dims(x0, eps, "forward_diffuse")?;
    if t == 0 {
        return Ok(x0.clone());
    }
    let a = sched.alpha_bar(t).sqrt();
    let b = (1.0 - sched.alpha_bar(t)).sqrt();
    x0.zip_map(eps, |x, e| a * x + b * e)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossReduction {
    /// Squared L2 norm of the masked residual.
    #[default]
    Sum,
    /// The same divided by the number of masked voxels (0 for an empty
    /// mask).
    Mean,
}

/// `‖M_f ⊙ (ε − ε̂)‖²`. Only voxels inside the mask are read, so values of
/// `ε̂` outside it have no influence at all.
pub fn scar_focused_loss(eps: &Volume3, eps_hat: &Volume3, mask: &Mask3, reduction: LossReduction) -> Result<f64> {
    ensure_same_dims(eps, eps_hat, "scar_focused_loss")?;
    eps.geometry().ensure_same_dims(mask.geometry(), "scar_focused_loss")?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((e, h), &m) in eps.data().iter().zip(eps_hat.data()).zip(mask.data()) {
        if m {
            let r = e - h;
            sum += r * r;
            n += 1;
        }
    }
    Ok(match reduction {
        LossReduction::Sum => sum,
        LossReduction::Mean if n == 0 => 0.0,
        LossReduction::Mean => sum / n as f64,
    })
}

/// Voxel-wise select: `o` inside the mask, `x_noised` outside.
pub fn reverse_blend(o: &Volume3, x_noised: &Volume3, mask: &Mask3) -> Result<Volume3> {
    ensure_same_dims(o, x_noised, "reverse_blend")?;
    o.geometry().ensure_same_dims(mask.geometry(), "reverse_blend")?;
    let data = o
        .data()
        .iter()
        .zip(x_noised.data())
        .zip(mask.data())
        .map(|((&a, &b), &m)| if m { a } else { b })
        .collect();
    Volume3::new(*x_noised.geometry(), data)
}

/// Normalised intensity histogram of a lesion region, used as the
/// conditioning payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LesionHistogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl LesionHistogram {
    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Histogram of `v` over the voxels of `m`, with `bins` equal-width bins
/// spanning the lesion's intensity range (a constant region uses
/// `[v − 0.5, v + 0.5]`).
pub fn lesion_histogram(v: &Volume3, m: &Mask3, bins: usize) -> Result<LesionHistogram> {
    v.geometry().ensure_same_dims(m.geometry(), "lesion_histogram")?;
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let values: Vec<f64> = v.data().iter().zip(m.data()).filter(|(_, &k)| k).map(|(&x, _)| x).collect();
    if values.is_empty() {
        return Err(Error::EmptyMask);
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("lesion intensities".into()));
    }
    let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for x in &values {
        let b = (((x - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = values.len() as f64;
    Ok(LesionHistogram {
        edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
        masses: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Polynomial learning-rate decay `base · (1 − epoch / epoch_max)^0.9`.
pub fn poly_lr(epoch: usize, epoch_max: usize, base_lr: f64) -> Result<f64> {
    if epoch_max == 0 || epoch > epoch_max {
        return Err(Error::InvalidParameter(format!(
            "epoch {epoch} must lie in 0..={epoch_max} with a positive maximum"
        )));
    }
    Ok(base_lr * (1.0 - epoch as f64 / epoch_max as f64).powf(0.9))
}
