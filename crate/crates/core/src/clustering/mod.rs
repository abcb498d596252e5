//! Per-pixel feature field, Ward-linkage clustering and label smoothing.

mod smooth;
mod ward;

pub use smooth::{label_smooth, SmoothMode};
pub use ward::{ward_cluster, ward_linkage, ward_partition, Merge, DEFAULT_SAMPLE_SIZE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_dims, Image};
use crate::optics::AttenuationMap;
use crate::scalar::Scalar;

/// Per-pixel cluster index in `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    rows: usize,
    cols: usize,
    labels: Vec<u8>,
    k: u8,
}

impl LabelMap {
    pub fn new(rows: usize, cols: usize, labels: Vec<u8>, k: u8) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidImage(format!(
                "label map must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if labels.len() != rows * cols {
            return Err(Error::InvalidImage(format!(
                "expected {} labels, got {}",
                rows * cols,
                labels.len()
            )));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("label map needs k >= 1".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > k) {
            return Err(Error::InvalidImage(format!("label {bad} outside 1..={k}")));
        }
        Ok(Self {
            rows,
            cols,
            labels,
            k,
        })
    }

    /// Every pixel in cluster 1.
    pub fn uniform(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![1; rows * cols], 1)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn label_at(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.cols + col]
    }

    /// Pixel count per label; index 0 is label 1.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k as usize];
        for &l in &self.labels {
            counts[l as usize - 1] += 1;
        }
        counts
    }

    /// Number of distinct labels actually present.
    pub fn distinct(&self) -> usize {
        self.counts().iter().filter(|&&c| c > 0).count()
    }
}

/// Transform applied to each raw channel before z-scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScale {
    /// Natural log, floored 60 dB below the channel maximum. Speckle is
    /// multiplicative, so this makes layer clusters roughly isotropic.
    #[default]
    Log,
    /// Raw linear values.
    Linear,
}

impl std::str::FromStr for FeatureScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Self::Log),
            "linear" => Ok(Self::Linear),
            _ => Err(Error::InvalidParameter(format!(
                "feature scale must be log or linear, got {s:?}"
            ))),
        }
    }
}

const LOG_FLOOR_RATIO: f64 = 1e-6;

/// Weighted, z-scored (intensity, attenuation) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    pub rows: usize,
    pub cols: usize,
    /// `[f_int, f_att]` per pixel, row-major.
    pub features: Vec<[f64; 2]>,
    /// Attenuation weight, renormalized.
    pub w1: f64,
    /// Intensity weight, renormalized.
    pub w2: f64,
    pub scale: FeatureScale,
    /// Source intensities, kept for brightness ordering of clusters.
    pub intensity: Vec<f64>,
}

impl FeatureField {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.w1, self.w2)
    }

    /// Same field with both channels multiplied by `a`.
    pub fn rescaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for f in &mut out.features {
            f[0] *= a;
            f[1] *= a;
        }
        out
    }
}

fn zscore(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 0.0) || sd < mean.abs() * 1e-14 {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
}

fn compress(values: &mut [f64], scale: FeatureScale) {
    if scale == FeatureScale::Linear {
        return;
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let floor = max * LOG_FLOOR_RATIO;
    values.iter_mut().for_each(|v| *v = v.max(floor).ln());
}

/// Feature field with the default log scale.
pub fn build_features<T: Scalar>(
    img: &Image<T>,
    att: &AttenuationMap,
    w1: f64,
    w2: f64,
) -> Result<FeatureField> {
    build_features_with(img, att, w1, w2, FeatureScale::default())
}

/// Each channel is optionally log-compressed, z-scored over the whole image
/// (a constant channel becomes 0) and multiplied by its weight. Weights are
/// renormalized to sum to 1.
pub fn build_features_with<T: Scalar>(
    img: &Image<T>,
    att: &AttenuationMap,
    w1: f64,
    w2: f64,
    scale: FeatureScale,
) -> Result<FeatureField> {
    check_dims(img.dims(), att.dims())?;
    if !(w1.is_finite() && w2.is_finite() && w1 >= 0.0 && w2 >= 0.0 && w1 + w2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weights must be >= 0 with a positive sum, got w1={w1}, w2={w2}"
        )));
    }
    let total = w1 + w2;
    let (w1, w2) = (w1 / total, w2 / total);

    let intensity = img.to_f64_vec();
    let mut f_int = intensity.clone();
    let mut f_att = att.values.clone();
    compress(&mut f_int, scale);
    compress(&mut f_att, scale);
    zscore(&mut f_int);
    zscore(&mut f_att);

    let features = f_int
        .iter()
        .zip(&f_att)
        .map(|(&i, &a)| [w2 * i, w1 * a])
        .collect();
    Ok(FeatureField {
        rows: img.rows(),
        cols: img.cols(),
        features,
        w1,
        w2,
        scale,
        intensity,
    })
}
