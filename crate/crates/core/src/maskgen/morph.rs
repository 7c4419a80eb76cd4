//! Binary morphology, connected components and distance transforms.
//!
//! Voxels outside the grid count as background throughout.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::filter::gaussian_smooth;
use crate::preprocess::{bbox_with_margin, extract, paste};
use crate::volume::{Mask3, Volume3};

/// Erosion with a `k × k × k` cube (`k` odd, 1 to 7). `k = 1` is the
/// identity.
pub fn erode(m: &Mask3, k: usize) -> Result<Mask3> {
    if !(1..=7).contains(&k) || k % 2 == 0 {
        return Err(Error::InvalidParameter(format!("erosion kernel must be 1, 3, 5 or 7, got {k}")));
    }
    Mask3::new(*m.geometry(), erode_raw(m.data(), m.dims(), k))
}

pub(crate) fn erode_raw(data: &[bool], dims: [usize; 3], k: usize) -> Vec<bool> {
    if k <= 1 {
        return data.to_vec();
    }
    let mut cur = data.to_vec();
    for axis in 0..3 {
        cur = erode_axis(&cur, dims, axis, k / 2);
    }
    cur
}

fn erode_axis(src: &[bool], dims: [usize; 3], axis: usize, r: usize) -> Vec<bool> {
    let [nx, ny, nz] = dims;
    let n = dims[axis];
    let stride = [1, nx, nx * ny][axis];
    let mut out = vec![false; src.len()];
    let mut prefix = vec![0usize; n + 1];
    let lines: Vec<usize> = (0..nz)
        .flat_map(|z| (0..ny).flat_map(move |y| (0..nx).map(move |x| (x, y, z))))
        .filter(|&(x, y, z)| [x, y, z][axis] == 0)
        .map(|(x, y, z)| x + nx * (y + ny * z))
        .collect();
    for start in lines {
        for i in 0..n {
            prefix[i + 1] = prefix[i] + src[start + i * stride] as usize;
        }
        for i in r..n.saturating_sub(r) {
            if prefix[i + r + 1] - prefix[i - r] == 2 * r + 1 {
                out[start + i * stride] = true;
            }
        }
    }
    out
}

/// Fills background cavities not 6-connected to the grid border.
pub fn fill_holes(m: &Mask3) -> Mask3 {
    Mask3::new(*m.geometry(), fill_holes_raw(m.data(), m.dims())).expect("same geometry")
}

pub(crate) fn fill_holes_raw(data: &[bool], dims: [usize; 3]) -> Vec<bool> {
    let [nx, ny, nz] = dims;
    let mut outside = vec![false; data.len()];
    let mut queue = VecDeque::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let border = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                let i = x + nx * (y + ny * z);
                if border && !data[i] {
                    outside[i] = true;
                    queue.push_back(i);
                }
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
        let mut visit = |j: usize| {
            if !data[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < nx {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - nx);
        }
        if y + 1 < ny {
            visit(i + nx);
        }
        if z > 0 {
            visit(i - nx * ny);
        }
        if z + 1 < nz {
            visit(i + nx * ny);
        }
    }
    outside.iter().map(|&o| !o).collect()
}

/// 26-connected component labelling. Returns per-voxel labels (0 for
/// background, components numbered from 1 in scan order) and component
/// sizes indexed by `label - 1`.
pub fn connected_components(m: &Mask3) -> (Vec<u32>, Vec<usize>) {
    label_raw(m.data(), m.dims())
}

pub(crate) fn label_raw(data: &[bool], dims: [usize; 3]) -> (Vec<u32>, Vec<usize>) {
    let [nx, ny, nz] = dims;
    let mut labels = vec![0u32; data.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..data.len() {
        if !data[seed] || labels[seed] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[seed] = label;
        stack.push(seed);
        let mut size = 0usize;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y, z) = ((i % nx) as i64, ((i / nx) % ny) as i64, (i / (nx * ny)) as i64);
            for dz in -1..=1i64 {
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let (a, b, c) = (x + dx, y + dy, z + dz);
                        if a < 0 || b < 0 || c < 0 || a >= nx as i64 || b >= ny as i64 || c >= nz as i64 {
                            continue;
                        }
                        let j = a as usize + nx * (b as usize + ny * c as usize);
                        if data[j] && labels[j] == 0 {
                            labels[j] = label;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Drops 26-connected components with fewer than `min_voxels` voxels.
pub fn remove_small_components(m: &Mask3, min_voxels: usize) -> Mask3 {
    Mask3::new(*m.geometry(), remove_small_raw(m.data(), m.dims(), min_voxels)).expect("same geometry")
}

fn remove_small_raw(data: &[bool], dims: [usize; 3], min_voxels: usize) -> Vec<bool> {
    if min_voxels <= 1 {
        return data.to_vec();
    }
    let (labels, sizes) = label_raw(data, dims);
    labels.iter().map(|&l| l > 0 && sizes[l as usize - 1] >= min_voxels).collect()
}

/// Upper bound on clean-up passes before giving up on an exact fixed point.
const MAX_PASSES: usize = 64;

/// Scar clean-up: hole filling, Gaussian smoothing of the indicator
/// (`sigma` in voxels, 0 to skip) re-thresholded at 0.5, removal of
/// components smaller than `min_component_voxels`, then intersection with
/// `myocardium`. The pass is repeated until the mask stops changing, so
/// applying the function twice gives the same result as applying it once.
pub fn postprocess(m: &Mask3, myocardium: Option<&Mask3>, sigma: f64, min_component_voxels: usize) -> Result<Mask3> {
    if let Some(myo) = myocardium {
        m.geometry().ensure_matches(myo.geometry(), "postprocess")?;
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("smoothing sigma must be >= 0, got {sigma}")));
    }
    let margin = if sigma > 0.0 { (3.0 * sigma).ceil() as usize + 2 } else { 1 };
    let mut cur = m.clone();
    for _ in 0..MAX_PASSES {
        let next = postprocess_pass(&cur, myocardium, sigma, min_component_voxels, margin);
        if next == cur {
            break;
        }
        cur = next;
    }
    Ok(cur)
}

fn postprocess_pass(m: &Mask3, myo: Option<&Mask3>, sigma: f64, min_voxels: usize, margin: usize) -> Mask3 {
    let Ok((lo, hi)) = bbox_with_margin(m, margin) else {
        return m.clone();
    };
    let crop = extract(m, lo, hi);
    let dims = crop.dims();
    let filled = fill_holes_raw(crop.data(), dims);
    let smoothed = if sigma > 0.0 {
        let f: Vec<f64> = filled.iter().map(|&b| b as u8 as f64).collect();
        gaussian_smooth(&f, dims, [sigma; 3]).into_iter().map(|v| v > 0.5).collect()
    } else {
        filled
    };
    let cleaned = remove_small_raw(&smoothed, dims, min_voxels);
    let mut out = Mask3::filled(*m.geometry(), false);
    paste(&mut out, &Mask3::new(*crop.geometry(), cleaned).expect("crop geometry"), lo);
    match myo {
        Some(myo) => out.and(myo).expect("checked geometry"),
        None => out,
    }
}

/// Squared distance transform along one line (lower envelope of
/// parabolas), positions scaled by `s`.
fn edt_line(f: &[f64], s: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if finite.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let pos = |q: usize| q as f64 * s;
    for &q in &finite {
        loop {
            let Some(&p) = v.last() else { break };
            let cross = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
            if cross <= *z.last().expect("paired with v") {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(cross);
                break;
            }
        }
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
        }
    }
    let mut k = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let x = pos(i);
        while k + 1 < v.len() && z[k + 1] < x {
            k += 1;
        }
        let d = x - pos(v[k]);
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance in mm from every voxel to the nearest foreground
/// voxel (0 on the foreground, infinite when the mask is empty).
pub fn distance_to_foreground(m: &Mask3) -> Vec<f64> {
    let dims = m.dims();
    let spacing = m.spacing();
    let [nx, ny, _] = dims;
    let mut d: Vec<f64> = m.data().iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    for axis in 0..3 {
        let n = dims[axis];
        let stride = [1, nx, nx * ny][axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        for start in 0..d.len() {
            let c = [start % nx, (start / nx) % ny, start / (nx * ny)];
            if c[axis] != 0 {
                continue;
            }
            for i in 0..n {
                line[i] = d[start + i * stride];
            }
            edt_line(&line, spacing[axis], &mut out, &mut v, &mut z);
            for i in 0..n {
                d[start + i * stride] = out[i];
            }
        }
    }
    d.iter_mut().for_each(|x| *x = x.sqrt());
    d
}

/// Signed Euclidean distance in mm: positive outside (distance to the
/// foreground), negative inside (minus the distance to the background).
pub fn signed_distance(m: &Mask3) -> Result<Volume3> {
    if m.is_all_background() {
        return Err(Error::EmptyMask);
    }
    let outside = distance_to_foreground(m);
    let inside = distance_to_foreground(&m.not());
    let data = m
        .data()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if b {
                if inside[i].is_finite() {
                    -inside[i]
                } else {
                    -(m.spacing().iter().cloned().fold(0.0, f64::max) * m.dims().iter().sum::<usize>() as f64)
                }
            } else {
                outside[i]
            }
        })
        .collect();
    Volume3::new(*m.geometry(), data)
}
