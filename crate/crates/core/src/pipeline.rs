//! End-to-end CFF run: attenuation, features, clustering, smoothing, filter.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clustering::{
    build_features_with, label_smooth, ward_cluster, FeatureScale, LabelMap, SmoothMode,
    DEFAULT_SAMPLE_SIZE,
};
use crate::error::{Error, Result};
use crate::filtering::{cff_filter_with_profile, wiener_with_estimate, ClusterNoiseProfile};
use crate::image::{Image, WindowSpec};
use crate::optics::{estimate_attenuation_with, AttenuationMap, AttenuationMethod};
use crate::scalar::Scalar;

/// Offset from the run seed to the clustering sampler's seed.
pub const CLUSTER_SEED_OFFSET: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub k: usize,
    pub window: WindowSpec,
    /// Attenuation weight.
    pub w1: f64,
    /// Intensity weight.
    pub w2: f64,
    pub smooth: SmoothMode,
    pub sample_size: usize,
    pub seed: u64,
    pub wiener_noise_var: Option<f64>,
    pub feature_scale: FeatureScale,
    pub attenuation: AttenuationMethod,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 4,
            window: WindowSpec::default(),
            w1: 0.7,
            w2: 0.3,
            smooth: SmoothMode::default(),
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
            wiener_noise_var: None,
            feature_scale: FeatureScale::default(),
            attenuation: AttenuationMethod::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "k must lie in 1..=255, got {}",
                self.k
            )));
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.w1 + self.w2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weights must be >= 0 with a positive sum, got w1={}, w2={}",
                self.w1, self.w2
            )));
        }
        if self.sample_size < self.k {
            return Err(Error::InvalidParameter(format!(
                "sample_size {} is smaller than k = {}",
                self.sample_size, self.k
            )));
        }
        if let Some(v) = self.wiener_noise_var {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "wiener_noise_var must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub attenuation: Duration,
    pub features: Duration,
    pub clustering: Duration,
    pub smoothing: Duration,
    pub filtering: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.attenuation + self.features + self.clustering + self.smoothing + self.filtering
    }
}

/// Per-cluster summary of a CFF run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub label: u8,
    pub pixels: usize,
    pub mean_intensity: f64,
    pub mean_attenuation: f64,
    pub noise_var: f64,
}

#[derive(Debug, Clone)]
pub struct CffOutput<T: Scalar> {
    pub filtered: Image<T>,
    /// Smoothed labels used by the filter.
    pub labels: LabelMap,
    pub attenuation: AttenuationMap,
    pub noise: ClusterNoiseProfile,
    pub clusters: Vec<ClusterSummary>,
    pub timings: StageTimings,
}

fn timed<R>(slot: &mut Duration, f: impl FnOnce() -> R) -> R {
    let t = Instant::now();
    let r = f();
    *slot = t.elapsed();
    r
}

/// Run the full cluster-based filter on `img`.
pub fn run_cff<T: Scalar>(img: &Image<T>, cfg: &RunConfig) -> Result<CffOutput<T>> {
    cfg.validate()?;
    let mut timings = StageTimings::default();
    let att = timed(&mut timings.attenuation, || {
        estimate_attenuation_with(img, cfg.attenuation)
    })?;
    let ff = timed(&mut timings.features, || {
        build_features_with(img, &att, cfg.w1, cfg.w2, cfg.feature_scale)
    })?;
    let raw = timed(&mut timings.clustering, || {
        ward_cluster(
            &ff,
            cfg.k,
            cfg.sample_size,
            cfg.seed.wrapping_add(CLUSTER_SEED_OFFSET),
        )
    })?;
    let labels = timed(&mut timings.smoothing, || {
        label_smooth(&raw, cfg.window, cfg.smooth)
    });
    let (filtered, noise) = timed(&mut timings.filtering, || {
        cff_filter_with_profile(img, &labels, cfg.window)
    })?;

    let k = labels.k() as usize;
    let mut sum_i = vec![0.0; k];
    let mut sum_a = vec![0.0; k];
    for ((&l, p), a) in labels.labels().iter().zip(img.pixels()).zip(&att.values) {
        sum_i[l as usize - 1] += p.wide();
        sum_a[l as usize - 1] += a;
    }
    let clusters = (0..k)
        .filter(|&i| noise.pixel_count[i] > 0)
        .map(|i| {
            let q = noise.pixel_count[i] as f64;
            ClusterSummary {
                label: i as u8 + 1,
                pixels: noise.pixel_count[i],
                mean_intensity: sum_i[i] / q,
                mean_attenuation: sum_a[i] / q,
                noise_var: noise.noise_var[i],
            }
        })
        .collect();

    Ok(CffOutput {
        filtered,
        labels,
        attenuation: att,
        noise,
        clusters,
        timings,
    })
}

/// Baseline adaptive Wiener with the run's window and noise setting.
pub fn run_wiener<T: Scalar>(img: &Image<T>, cfg: &RunConfig) -> (Image<T>, f64) {
    wiener_with_estimate(img, cfg.window, cfg.wiener_noise_var)
}
