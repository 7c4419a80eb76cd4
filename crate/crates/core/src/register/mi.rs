//! Mutual information from a dense joint histogram.
//!
//! Bin edges span each image's own `[min, max]`; no Parzen smoothing.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Volume3;

/// Maps intensities to `0..bins` using per-image min/max edges.
#[derive(Clone, Copy, Debug)]
pub struct Binning {
    min: f64,
    scale: f64,
    bins: usize,
}

impl Binning {
    pub fn new(min: f64, max: f64, bins: usize) -> Self {
        let scale = if max > min { bins as f64 / (max - min) } else { 0.0 };
        Binning { min, scale, bins }
    }

    pub fn of(values: &[f64], bins: usize) -> Self {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        Binning::new(lo, hi, bins)
    }

    #[inline]
    pub fn bin(&self, v: f64) -> usize {
        let b = ((v - self.min) * self.scale).floor();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.bins - 1)
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }
}

/// Joint counts, row-major `[a_bin * bins_b + b_bin]`.
#[derive(Clone, Debug)]
pub struct JointHistogram {
    pub bins_a: usize,
    pub bins_b: usize,
    pub counts: Vec<u64>,
}

impl JointHistogram {
    pub fn new(bins_a: usize, bins_b: usize) -> Self {
        JointHistogram {
            bins_a,
            bins_b,
            counts: vec![0; bins_a * bins_b],
        }
    }

    pub fn add(&mut self, a: usize, b: usize) {
        self.counts[a * self.bins_b + b] += 1;
    }

    pub fn merge(mut self, other: &JointHistogram) -> Self {
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// MI in nats, clamped at zero against round-off.
    pub fn mutual_information(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        let mut pa = vec![0u64; self.bins_a];
        let mut pb = vec![0u64; self.bins_b];
        for i in 0..self.bins_a {
            for j in 0..self.bins_b {
                let c = self.counts[i * self.bins_b + j];
                pa[i] += c;
                pb[j] += c;
            }
        }
        let h_ab = entropy_of_counts(&self.counts, n);
        let h_a = entropy_of_counts(&pa, n);
        let h_b = entropy_of_counts(&pb, n);
        (h_a + h_b - h_ab).max(0.0)
    }
}

pub(crate) fn entropy_of_counts(counts: &[u64], n: u64) -> f64 {
    let nf = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Histogram of paired samples.
pub fn joint_histogram(a: &[f64], b: &[f64], ba: Binning, bb: Binning) -> JointHistogram {
    const CHUNK: usize = 1 << 14;
    a.par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .fold(
            || JointHistogram::new(ba.bins(), bb.bins()),
            |mut h, (ca, cb)| {
                for (&x, &y) in ca.iter().zip(cb) {
                    h.add(ba.bin(x), bb.bin(y));
                }
                h
            },
        )
        .reduce(|| JointHistogram::new(ba.bins(), bb.bins()), |h, o| h.merge(&o))
}

/// Shannon entropy (nats) of `v` under its own min/max binning.
pub fn marginal_entropy(v: &Volume3, bins: usize) -> f64 {
    let b = Binning::of(v.data(), bins);
    let mut counts = vec![0u64; bins];
    for &x in v.data() {
        counts[b.bin(x)] += 1;
    }
    entropy_of_counts(&counts, v.len() as u64)
}

/// Mutual information (nats) between two equally sized images.
pub fn mutual_information(a: &Volume3, b: &Volume3, bins: usize) -> Result<f64> {
    a.geometry().ensure_same_dims(b.geometry(), "mutual_information")?;
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("bins must be >= 2, got {bins}")));
    }
    let ba = Binning::of(a.data(), bins);
    let bb = Binning::of(b.data(), bins);
    Ok(joint_histogram(a.data(), b.data(), ba, bb).mutual_information())
}
