//! Adaptive Wiener filter and its cluster-masked variant.

use rayon::prelude::*;

use crate::clustering::LabelMap;
use crate::error::Result;
use crate::image::{check_dims, Image, WindowSpec};
use crate::scalar::Scalar;
use crate::stats::{global_mean, local_stats, Sat};

/// `max(0, local - noise) / local`, or 0 where the local variance vanishes.
#[inline]
pub fn wiener_gain(local_var: f64, noise_var: f64) -> f64 {
    if local_var > 0.0 {
        ((local_var - noise_var).max(0.0) / local_var).min(1.0)
    } else {
        0.0
    }
}

/// Adaptive Wiener filter. Without an explicit noise variance the mean of the
/// local-variance map is used.
pub fn wiener<T: Scalar>(img: &Image<T>, w: WindowSpec, noise_var: Option<f64>) -> Image<T> {
    wiener_with_estimate(img, w, noise_var).0
}

/// As [`wiener`], also returning the noise variance that was applied.
pub fn wiener_with_estimate<T: Scalar>(
    img: &Image<T>,
    w: WindowSpec,
    noise_var: Option<f64>,
) -> (Image<T>, f64) {
    let st = local_stats(img, w);
    let nv = noise_var.unwrap_or_else(|| st.mean_var());
    let pixels = img
        .pixels()
        .par_iter()
        .zip(st.mean.par_iter().zip(st.var.par_iter()))
        .map(|(&x, (&m, &v))| T::narrow(m + wiener_gain(v, nv) * (x.wide() - m)))
        .collect();
    (Image::from_kernel(img, pixels), nv)
}

/// Window statistics restricted to pixels sharing the centre pixel's label.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedStats {
    pub rows: usize,
    pub cols: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Same-label pixels in the window, centre included.
    pub count: Vec<u32>,
}

/// Per-pixel masked mean and population variance over same-label window
/// pixels, border-clipped.
pub fn masked_stats<T: Scalar>(
    img: &Image<T>,
    lm: &LabelMap,
    w: WindowSpec,
) -> Result<MaskedStats> {
    check_dims(img.dims(), lm.dims())?;
    let (rows, cols) = img.dims();
    let k = lm.k() as usize;
    let values = img.to_f64_vec();
    let shift = global_mean(&values);
    let labels = lm.labels();

    let tables: Vec<[Sat; 3]> = (1..=k as u8)
        .into_par_iter()
        .map(|label| {
            let inside = |i: usize| labels[i] == label;
            let mut n = Sat::new(rows, cols);
            let mut s1 = Sat::new(rows, cols);
            let mut s2 = Sat::new(rows, cols);
            n.fill(rows, cols, |i| if inside(i) { 1.0 } else { 0.0 });
            s1.fill(
                rows,
                cols,
                |i| if inside(i) { values[i] - shift } else { 0.0 },
            );
            s2.fill(rows, cols, |i| {
                if inside(i) {
                    let d = values[i] - shift;
                    d * d
                } else {
                    0.0
                }
            });
            [n, s1, s2]
        })
        .collect();

    let mut mean = vec![0.0; rows * cols];
    let mut var = vec![0.0; rows * cols];
    let mut count = vec![0u32; rows * cols];
    mean.par_chunks_mut(cols)
        .zip(var.par_chunks_mut(cols))
        .zip(count.par_chunks_mut(cols))
        .enumerate()
        .for_each(|(r, ((mrow, vrow), crow))| {
            for c in 0..cols {
                let [n, s1, s2] = &tables[labels[r * cols + c] as usize - 1];
                let (r0, r1, c0, c1) = w.clipped(r, c, (rows, cols));
                let p = n.sum(r0, r1, c0, c1);
                let m = s1.sum(r0, r1, c0, c1) / p;
                let v = s2.sum(r0, r1, c0, c1) / p - m * m;
                mrow[c] = m + shift;
                vrow[c] = v.max(0.0);
                crow[c] = p as u32;
            }
        });

    Ok(MaskedStats {
        rows,
        cols,
        mean,
        var,
        count,
    })
}

/// Noise variance per cluster: mean masked variance over its pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNoiseProfile {
    /// Index 0 is label 1; 0.0 for labels with no pixels.
    pub noise_var: Vec<f64>,
    pub pixel_count: Vec<usize>,
}

impl ClusterNoiseProfile {
    /// Noise variance of `label`, `None` when the cluster is empty.
    pub fn get(&self, label: u8) -> Option<f64> {
        let i = (label as usize).checked_sub(1)?;
        (*self.pixel_count.get(i)? > 0).then(|| self.noise_var[i])
    }
}

pub fn cluster_noise(ms: &MaskedStats, lm: &LabelMap) -> Result<ClusterNoiseProfile> {
    check_dims((ms.rows, ms.cols), lm.dims())?;
    let k = lm.k() as usize;
    let mut sum = vec![0.0f64; k];
    let mut pixel_count = vec![0usize; k];
    for (&l, &v) in lm.labels().iter().zip(&ms.var) {
        sum[l as usize - 1] += v;
        pixel_count[l as usize - 1] += 1;
    }
    let noise_var = sum
        .iter()
        .zip(&pixel_count)
        .map(|(&s, &q)| if q > 0 { s / q as f64 } else { 0.0 })
        .collect();
    Ok(ClusterNoiseProfile {
        noise_var,
        pixel_count,
    })
}

/// Cluster-masked Wiener filter.
pub fn cff_filter<T: Scalar>(img: &Image<T>, lm: &LabelMap, w: WindowSpec) -> Result<Image<T>> {
    cff_filter_with_profile(img, lm, w).map(|(out, _)| out)
}

/// As [`cff_filter`], also returning the per-cluster noise estimates.
pub fn cff_filter_with_profile<T: Scalar>(
    img: &Image<T>,
    lm: &LabelMap,
    w: WindowSpec,
) -> Result<(Image<T>, ClusterNoiseProfile)> {
    let ms = masked_stats(img, lm, w)?;
    let profile = cluster_noise(&ms, lm)?;
    let labels = lm.labels();
    let pixels = img
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let m = ms.mean[i];
            let g = wiener_gain(ms.var[i], profile.noise_var[labels[i] as usize - 1]);
            T::narrow(m + g * (x.wide() - m))
        })
        .collect();
    Ok((Image::from_kernel(img, pixels), profile))
}
