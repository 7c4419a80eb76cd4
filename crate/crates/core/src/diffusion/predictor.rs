//! Noise predictors. The network itself lives outside this crate; these are
//! the seam it plugs into plus a few stand-ins for testing.

use std::path::PathBuf;
use std::process::Command;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nrrd::{load_nrrd, save_nrrd_with_meta};
use crate::rng::white_noise;
use crate::volume::Volume3;

use super::{LesionHistogram, NoiseSchedule};

/// Predicts the noise `ε̂` present in `x_t` at timestep `t`, conditioned on
/// a lesion intensity histogram.
pub trait NoisePredictor {
    fn predict(&mut self, x_t: &Volume3, t: usize, h: &LesionHistogram) -> Result<Volume3>;
}

/// Always predicts zero noise.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPredictor;

impl NoisePredictor for ZeroPredictor {
    fn predict(&mut self, x_t: &Volume3, _t: usize, _h: &LesionHistogram) -> Result<Volume3> {
        Ok(Volume3::filled(*x_t.geometry(), 0.0))
    }
}

/// Predicts independent standard normal noise on every call.
#[derive(Clone, Debug)]
pub struct GaussianPredictor<R> {
    rng: R,
}

impl<R: Rng> GaussianPredictor<R> {
    pub fn new(rng: R) -> Self {
        GaussianPredictor { rng }
    }
}

impl<R: Rng> NoisePredictor for GaussianPredictor<R> {
    fn predict(&mut self, x_t: &Volume3, _t: usize, _h: &LesionHistogram) -> Result<Volume3> {
        Volume3::new(*x_t.geometry(), white_noise(&mut self.rng, x_t.len()))
    }
}

/// Returns the exact noise that would take `target` to `x_t`,
/// `(x_t − √ᾱ_t · target) / √(1 − ᾱ_t)`.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    target: Volume3,
    schedule: NoiseSchedule,
}

impl OraclePredictor {
    pub fn new(target: Volume3, schedule: NoiseSchedule) -> Self {
        OraclePredictor { target, schedule }
    }
}

impl NoisePredictor for OraclePredictor {
    fn predict(&mut self, x_t: &Volume3, t: usize, _h: &LesionHistogram) -> Result<Volume3> {
        if t == 0 || t > self.schedule.steps() {
            return Err(Error::InvalidParameter(format!("oracle asked for timestep {t}")));
        }
        let a = self.schedule.alpha_bar(t).sqrt();
        let b = (1.0 - self.schedule.alpha_bar(t)).sqrt();
        x_t.zip_map(&self.target, |x, y| (x - a * y) / b)
    }
}

/// Hands each prediction to an external program through files.
///
/// Before every call `x_t` is written to `<workdir>/x_t.nrrd` (with a
/// `timestep` header field) and the histogram to `<workdir>/histogram.json`.
/// The command runs with `SCARFORGE_XT`, `SCARFORGE_T`, `SCARFORGE_HIST` and
/// `SCARFORGE_EPS` set in its environment and must write `ε̂` as a float
/// NRRD to the `SCARFORGE_EPS` path.
#[derive(Clone, Debug)]
pub struct FileExchangePredictor {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub workdir: PathBuf,
}

impl FileExchangePredictor {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>, workdir: impl Into<PathBuf>) -> Self {
        FileExchangePredictor {
            program: program.into(),
            args,
            workdir: workdir.into(),
        }
    }
}

impl NoisePredictor for FileExchangePredictor {
    fn predict(&mut self, x_t: &Volume3, t: usize, h: &LesionHistogram) -> Result<Volume3> {
        std::fs::create_dir_all(&self.workdir).map_err(|e| Error::io(&self.workdir, e))?;
        let xt_path = self.workdir.join("x_t.nrrd");
        let hist_path = self.workdir.join("histogram.json");
        let eps_path = self.workdir.join("eps.nrrd");
        if eps_path.exists() {
            std::fs::remove_file(&eps_path).map_err(|e| Error::io(&eps_path, e))?;
        }
        save_nrrd_with_meta(x_t, &xt_path, &[("timestep", t.to_string())])?;
        h.save_json(&hist_path)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .env("SCARFORGE_XT", &xt_path)
            .env("SCARFORGE_T", t.to_string())
            .env("SCARFORGE_HIST", &hist_path)
            .env("SCARFORGE_EPS", &eps_path)
            .status()
            .map_err(|e| Error::Predictor(format!("could not start {}: {e}", self.program.display())))?;
        if !status.success() {
            return Err(Error::Predictor(format!("{} exited with {status} at t={t}", self.program.display())));
        }
        let eps: Volume3 = load_nrrd(&eps_path)?;
        x_t.geometry().ensure_same_dims(eps.geometry(), "predictor output")?;
        Ok(eps)
    }
}
