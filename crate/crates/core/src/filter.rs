//! Separable Gaussian smoothing, gradients and interpolation on flat
//! x-fastest arrays.
//!
//! Boundaries replicate the edge voxel, so every output value is a convex
//! combination of inputs. Work is split over output z-slices; each output
//! value is computed in a fixed order, so results do not depend on the
//! thread count.

use rayon::prelude::*;

/// Normalised Gaussian taps with radius `ceil(3σ)`. `σ <= 0` yields `[1]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn convolve_axis(src: &[f64], dims: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f64> {
    if kernel.len() == 1 {
        return src.to_vec();
    }
    let [nx, ny, _] = dims;
    let r = (kernel.len() / 2) as i64;
    let n_axis = dims[axis] as i64;
    let stride = [1, nx, nx * ny][axis];
    let slice = nx * ny;
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(slice).enumerate().for_each(|(z, plane)| {
        for y in 0..ny {
            for x in 0..nx {
                let pos = [x, y, z][axis] as i64;
                let base = x + nx * (y + ny * z) - (pos as usize) * stride;
                let mut acc = 0.0;
                for (t, &w) in kernel.iter().enumerate() {
                    let p = (pos + t as i64 - r).clamp(0, n_axis - 1) as usize;
                    acc += w * src[base + p * stride];
                }
                plane[x + nx * y] = acc;
            }
        }
    });
    out
}

/// Gaussian smoothing with per-axis σ in voxels.
pub fn gaussian_smooth(src: &[f64], dims: [usize; 3], sigma: [f64; 3]) -> Vec<f64> {
    let mut cur = src.to_vec();
    for axis in 0..3 {
        let k = gaussian_kernel(sigma[axis]);
        cur = convolve_axis(&cur, dims, axis, &k);
    }
    cur
}

/// Smooths each component of a vector field.
pub fn gaussian_smooth_vec(src: &[[f64; 3]], dims: [usize; 3], sigma: [f64; 3]) -> Vec<[f64; 3]> {
    let comps: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let plane: Vec<f64> = src.iter().map(|v| v[c]).collect();
            gaussian_smooth(&plane, dims, sigma)
        })
        .collect();
    (0..src.len())
        .map(|i| [comps[0][i], comps[1][i], comps[2][i]])
        .collect()
}

/// Central-difference gradient in voxel units (one-sided at the borders).
pub fn gradient(src: &[f64], dims: [usize; 3]) -> Vec<[f64; 3]> {
    let [nx, ny, _] = dims;
    let strides = [1, nx, nx * ny];
    let slice = nx * ny;
    let mut out = vec![[0.0; 3]; src.len()];
    out.par_chunks_mut(slice).enumerate().for_each(|(z, plane)| {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                let pos = [x, y, z];
                let mut g = [0.0; 3];
                for a in 0..3 {
                    let n = dims[a];
                    if n < 2 {
                        continue;
                    }
                    let s = strides[a];
                    g[a] = if pos[a] == 0 {
                        src[i + s] - src[i]
                    } else if pos[a] == n - 1 {
                        src[i] - src[i - s]
                    } else {
                        0.5 * (src[i + s] - src[i - s])
                    };
                }
                plane[x + nx * y] = g;
            }
        }
    });
    out
}

const EDGE_EPS: f64 = 1e-6;

#[inline]
fn clamp_coord(c: f64, n: usize) -> Option<f64> {
    let hi = (n - 1) as f64;
    if c < -EDGE_EPS || c > hi + EDGE_EPS || !c.is_finite() {
        None
    } else {
        Some(c.clamp(0.0, hi))
    }
}

/// Trilinear sample at a continuous index; `None` outside the grid.
#[inline]
pub fn sample_trilinear(src: &[f64], dims: [usize; 3], idx: [f64; 3]) -> Option<f64> {
    let [nx, ny, _] = dims;
    let mut i0 = [0usize; 3];
    let mut i1 = [0usize; 3];
    let mut w = [0.0f64; 3];
    for a in 0..3 {
        let c = clamp_coord(idx[a], dims[a])?;
        let f = c.floor();
        i0[a] = f as usize;
        i1[a] = (i0[a] + 1).min(dims[a] - 1);
        w[a] = c - f;
    }
    let at = |x: usize, y: usize, z: usize| src[x + nx * (y + ny * z)];
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
    let c00 = lerp(at(i0[0], i0[1], i0[2]), at(i1[0], i0[1], i0[2]), w[0]);
    let c10 = lerp(at(i0[0], i1[1], i0[2]), at(i1[0], i1[1], i0[2]), w[0]);
    let c01 = lerp(at(i0[0], i0[1], i1[2]), at(i1[0], i0[1], i1[2]), w[0]);
    let c11 = lerp(at(i0[0], i1[1], i1[2]), at(i1[0], i1[1], i1[2]), w[0]);
    let c0 = lerp(c00, c10, w[1]);
    let c1 = lerp(c01, c11, w[1]);
    Some(lerp(c0, c1, w[2]))
}

/// Trilinear sample clamped to the grid edge (never `None`).
#[inline]
pub fn sample_trilinear_clamped(src: &[f64], dims: [usize; 3], idx: [f64; 3]) -> f64 {
    let c = [
        idx[0].clamp(0.0, (dims[0] - 1) as f64),
        idx[1].clamp(0.0, (dims[1] - 1) as f64),
        idx[2].clamp(0.0, (dims[2] - 1) as f64),
    ];
    sample_trilinear(src, dims, c).expect("clamped index is inside")
}

/// Nearest-neighbour lookup; `None` outside the grid.
#[inline]
pub fn nearest_index(dims: [usize; 3], idx: [f64; 3]) -> Option<usize> {
    let mut p = [0usize; 3];
    for a in 0..3 {
        let c = clamp_coord(idx[a], dims[a])?;
        p[a] = c.round() as usize;
    }
    Some(p[0] + dims[0] * (p[1] + dims[1] * p[2]))
}
