//! Brute-force reference implementations shared by the integration tests.
//! Nothing here uses summed-area tables, separable passes or other shortcuts.

#![allow(dead_code)]

use octd_core::{Image, LabelMap, Roi, WindowSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `|a - b| <= tol * max(|b|, 1)`: relative error against a unit data scale.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn max_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn random_image(seed: u64, rows: usize, cols: usize) -> Image<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(rows, cols, |_, _| rng.random::<f64>()).unwrap()
}

pub fn random_labels(seed: u64, rows: usize, cols: usize, k: u8) -> LabelMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let labels = (0..rows * cols).map(|_| rng.random_range(1..=k)).collect();
    LabelMap::new(rows, cols, labels, k).unwrap()
}

fn window(w: WindowSpec, rows: usize, cols: usize, r: usize, c: usize) -> Vec<(usize, usize)> {
    let (hr, hc) = (w.rows() as isize / 2, w.cols() as isize / 2);
    let mut out = Vec::new();
    for dr in -hr..=hr {
        for dc in -hc..=hc {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            if rr >= 0 && cc >= 0 && (rr as usize) < rows && (cc as usize) < cols {
                out.push((rr as usize, cc as usize));
            }
        }
    }
    out
}

fn two_pass(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    (m, vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n)
}

/// Per-pixel window mean and population variance, double loop.
pub fn local_stats(img: &Image<f64>, w: WindowSpec) -> (Vec<f64>, Vec<f64>) {
    let (rows, cols) = img.dims();
    let mut mean = Vec::new();
    let mut var = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let vals: Vec<f64> = window(w, rows, cols, r, c)
                .iter()
                .map(|&(a, b)| img.get(a, b))
                .collect();
            let (m, v) = two_pass(&vals);
            mean.push(m);
            var.push(v);
        }
    }
    (mean, var)
}

/// Masked mean, variance and count over same-label window pixels.
pub fn masked_stats(
    img: &Image<f64>,
    lm: &LabelMap,
    w: WindowSpec,
) -> (Vec<f64>, Vec<f64>, Vec<u32>) {
    let (rows, cols) = img.dims();
    let (mut mean, mut var, mut count) = (Vec::new(), Vec::new(), Vec::new());
    for r in 0..rows {
        for c in 0..cols {
            let k = lm.label_at(r, c);
            let vals: Vec<f64> = window(w, rows, cols, r, c)
                .into_iter()
                .filter(|&(a, b)| lm.label_at(a, b) == k)
                .map(|(a, b)| img.get(a, b))
                .collect();
            let (m, v) = two_pass(&vals);
            mean.push(m);
            var.push(v);
            count.push(vals.len() as u32);
        }
    }
    (mean, var, count)
}

fn gain(local: f64, noise: f64) -> f64 {
    if local > 0.0 {
        (local - noise).max(0.0) / local
    } else {
        0.0
    }
}

pub fn wiener(img: &Image<f64>, w: WindowSpec, noise: Option<f64>) -> Vec<f64> {
    let (mean, var) = local_stats(img, w);
    let nv = noise.unwrap_or_else(|| var.iter().sum::<f64>() / var.len() as f64);
    img.pixels()
        .iter()
        .enumerate()
        .map(|(i, &x)| mean[i] + gain(var[i], nv) * (x - mean[i]))
        .collect()
}

/// Quadruple-loop cluster-masked Wiener filter.
pub fn cff(img: &Image<f64>, lm: &LabelMap, w: WindowSpec) -> Vec<f64> {
    let (mean, var, _) = masked_stats(img, lm, w);
    let k = lm.k() as usize;
    let mut noise = vec![0.0; k + 1];
    let mut q = vec![0usize; k + 1];
    for (i, &l) in lm.labels().iter().enumerate() {
        noise[l as usize] += var[i];
        q[l as usize] += 1;
    }
    for l in 1..=k {
        if q[l] > 0 {
            noise[l] /= q[l] as f64;
        }
    }
    img.pixels()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let l = lm.labels()[i] as usize;
            mean[i] + gain(var[i], noise[l]) * (x - mean[i])
        })
        .collect()
}

pub fn snr(img: &Image<f64>, bg: &Roi) -> f64 {
    let mut inside = Vec::new();
    let mut peak: f64 = 0.0;
    for r in 0..img.rows() {
        for c in 0..img.cols() {
            let v = img.get(r, c);
            if r >= bg.top && r < bg.top + bg.height && c >= bg.left && c < bg.left + bg.width {
                inside.push(v);
            } else {
                peak = peak.max(v * v);
            }
        }
    }
    10.0 * (peak / two_pass(&inside).1).log10()
}

fn roi_vals(img: &Image<f64>, roi: &Roi) -> Vec<f64> {
    let mut v = Vec::new();
    for r in roi.top..roi.top + roi.height {
        for c in roi.left..roi.left + roi.width {
            v.push(img.get(r, c));
        }
    }
    v
}

pub fn cnr(img: &Image<f64>, rois: &[Roi], bg: &Roi) -> f64 {
    let (mb, vb) = two_pass(&roi_vals(img, bg));
    let total: f64 = rois
        .iter()
        .map(|roi| {
            let (mr, vr) = two_pass(&roi_vals(img, roi));
            (mr - mb) / (vr + vb).sqrt()
        })
        .sum();
    total / rois.len() as f64
}

fn lap(img: &Image<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for r in 1..img.rows() - 1 {
        for c in 1..img.cols() - 1 {
            let mut acc = 0.0;
            for (dr, dc, k) in [
                (-1, 0, 1.0),
                (1, 0, 1.0),
                (0, -1, 1.0),
                (0, 1, 1.0),
                (0, 0, -4.0),
            ] {
                acc += k * img.get((r as isize + dr) as usize, (c as isize + dc) as usize);
            }
            out.push(acc);
        }
    }
    out
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let da: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let db: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    num / (da * db).sqrt()
}

pub fn epi(original: &Image<f64>, filtered: &Image<f64>) -> f64 {
    pearson(&lap(original), &lap(filtered))
}

/// Direct 2-D Gaussian-windowed SSIM with per-window weight renormalization.
pub fn ssim(x: &Image<f64>, y: &Image<f64>) -> f64 {
    let (rows, cols) = x.dims();
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let mut ws = 0.0;
            let (mut mx, mut my) = (0.0, 0.0);
            let mut pts = Vec::new();
            for dr in -5isize..=5 {
                for dc in -5isize..=5 {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || cc < 0 || rr as usize >= rows || cc as usize >= cols {
                        continue;
                    }
                    let w = (-((dr * dr + dc * dc) as f64) / (2.0 * 1.5 * 1.5)).exp();
                    let (a, b) = (
                        x.get(rr as usize, cc as usize),
                        y.get(rr as usize, cc as usize),
                    );
                    ws += w;
                    mx += w * a;
                    my += w * b;
                    pts.push((w, a, b));
                }
            }
            mx /= ws;
            my /= ws;
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for (w, a, b) in pts {
                sxx += w * (a - mx) * (a - mx);
                syy += w * (b - my) * (b - my);
                sxy += w * (a - mx) * (b - my);
            }
            sxx /= ws;
            syy /= ws;
            sxy /= ws;
            total += ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
                / ((mx * mx + my * my + c1) * (sxx + syy + c2));
        }
    }
    total / (rows * cols) as f64
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Fraction of pixels whose label matches the truth under the best one-to-one
/// relabelling (exhaustive assignment over the confusion matrix).
pub fn best_permutation_accuracy(pred: &LabelMap, truth: &LabelMap) -> f64 {
    let k = (pred.k().max(truth.k())) as usize;
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        confusion[p as usize - 1][t as usize - 1] += 1;
    }
    let best = permutations(k)
        .iter()
        .map(|perm| (0..k).map(|p| confusion[p][perm[p]]).sum::<usize>())
        .max()
        .unwrap();
    best as f64 / pred.labels().len() as f64
}

/// Spearman rank correlation for tie-free samples.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    pearson(&rank(x), &rank(y))
}
