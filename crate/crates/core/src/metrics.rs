//! SNR, CNR, EPI and SSIM quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_dims, Image, Roi};
use crate::scalar::Scalar;

pub const SSIM_C1: f64 = 6.5025;
pub const SSIM_C2: f64 = 58.5225;
pub const SSIM_RADIUS: usize = 5;
pub const SSIM_SIGMA: f64 = 1.5;
/// Peak of the dynamic range implied by the SSIM constants.
pub const SSIM_RANGE: f64 = 255.0;
pub const AUTO_ROI_COUNT: usize = 10;
const AUTO_ROI_SIDE: usize = 20;
const BACKGROUND_SIDE: usize = 20;

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v)
}

fn peak_db(max_sq: f64, var: f64) -> f64 {
    10.0 * (max_sq / var).log10()
}

/// `10 log10(max I^2 / var_b)` with the maximum taken outside the background
/// ROI (over the whole image if the ROI covers it).
pub fn snr<T: Scalar>(img: &Image<T>, background: &Roi) -> Result<f64> {
    background.validate(img.dims())?;
    let bg = background.values(img);
    if bg.iter().all(|&v| v == bg[0]) {
        return Err(Error::DegenerateBackground);
    }
    let (_, var) = mean_var(&bg);
    let mut max_sq: Option<f64> = None;
    for r in 0..img.rows() {
        for c in 0..img.cols() {
            if !background.contains(r, c) {
                let v = img.get(r, c).wide();
                max_sq = Some(max_sq.map_or(v * v, |m: f64| m.max(v * v)));
            }
        }
    }
    let max_sq = max_sq.unwrap_or_else(|| bg.iter().map(|v| v * v).fold(0.0, f64::max));
    Ok(peak_db(max_sq, var))
}

/// SNR of a region on its own: peak over the region against its variance.
pub fn region_snr<T: Scalar>(img: &Image<T>, roi: &Roi) -> Result<f64> {
    roi.validate(img.dims())?;
    let vals = roi.values(img);
    let (_, var) = mean_var(&vals);
    if !(var > 0.0) {
        return Err(Error::DegenerateBackground);
    }
    let max_sq = vals.iter().map(|v| v * v).fold(0.0, f64::max);
    Ok(peak_db(max_sq, var))
}

/// `(mu_r - mu_b) / sqrt(var_r + var_b)` for each ROI.
pub fn cnr_contributions<T: Scalar>(
    img: &Image<T>,
    rois: &[Roi],
    background: &Roi,
) -> Result<Vec<f64>> {
    if rois.is_empty() {
        return Err(Error::InvalidParameter("CNR needs at least one ROI".into()));
    }
    background.validate(img.dims())?;
    let (mb, vb) = mean_var(&background.values(img));
    rois.iter()
        .enumerate()
        .map(|(index, roi)| {
            roi.validate(img.dims())?;
            let (mr, vr) = mean_var(&roi.values(img));
            let denom = vr + vb;
            if !(denom > 0.0) {
                return Err(Error::DegenerateRoi { index });
            }
            Ok((mr - mb) / denom.sqrt())
        })
        .collect()
}

/// Mean of [`cnr_contributions`].
pub fn cnr<T: Scalar>(img: &Image<T>, rois: &[Roi], background: &Roi) -> Result<f64> {
    let parts = cnr_contributions(img, rois, background)?;
    Ok(parts.iter().sum::<f64>() / parts.len() as f64)
}

/// 3x3 Laplacian (centre -4, 4-neighbours +1) on interior pixels.
pub fn laplacian<T: Scalar>(img: &Image<T>) -> Vec<f64> {
    let (rows, cols) = img.dims();
    if rows < 3 || cols < 3 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity((rows - 2) * (cols - 2));
    for r in 1..rows - 1 {
        for c in 1..cols - 1 {
            let v = |rr: usize, cc: usize| img.get(rr, cc).wide();
            out.push(v(r - 1, c) + v(r + 1, c) + v(r, c - 1) + v(r, c + 1) - 4.0 * v(r, c));
        }
    }
    out
}

/// Edge preservation index: Pearson correlation of the Laplacian responses.
pub fn epi<T: Scalar>(original: &Image<T>, filtered: &Image<T>) -> Result<f64> {
    check_dims(original.dims(), filtered.dims())?;
    let a = laplacian(original);
    let b = laplacian(filtered);
    let constant = |v: &[f64]| v.is_empty() || v.iter().all(|&x| x == v[0]);
    if constant(&a) || constant(&b) {
        return Err(Error::NoEdgeContent);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(Error::NoEdgeContent);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

fn gaussian_taps() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut taps = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - SSIM_RADIUS as f64;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable Gaussian blur with border-clipped, renormalized weights.
fn blur(src: &[f64], rows: usize, cols: usize, taps: &[f64]) -> Vec<f64> {
    let r = SSIM_RADIUS;
    let pass = |len: usize, at: &dyn Fn(usize) -> f64, i: usize| {
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(len);
        let (mut acc, mut wsum) = (0.0, 0.0);
        for j in lo..hi {
            let w = taps[j + r - i];
            acc += w * at(j);
            wsum += w;
        }
        acc / wsum
    };
    let mut tmp = vec![0.0; rows * cols];
    for y in 0..rows {
        let row = &src[y * cols..(y + 1) * cols];
        for x in 0..cols {
            tmp[y * cols + x] = pass(cols, &|j| row[j], x);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for x in 0..cols {
        for y in 0..rows {
            out[y * cols + x] = pass(rows, &|j| tmp[j * cols + x], y);
        }
    }
    out
}

/// Mean SSIM over all pixels, 11x11 Gaussian window (sigma 1.5), on the raw
/// pixel values. Inputs are expected in `[0, 255]`; see [`ssim_rescaled`].
pub fn ssim<T: Scalar>(reference: &Image<T>, test: &Image<T>) -> Result<f64> {
    check_dims(reference.dims(), test.dims())?;
    Ok(ssim_values(
        &reference.to_f64_vec(),
        &test.to_f64_vec(),
        reference.rows(),
        reference.cols(),
    ))
}

fn ssim_values(x: &[f64], y: &[f64], rows: usize, cols: usize) -> f64 {
    let taps = gaussian_taps();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, my) = (blur(x, rows, cols, &taps), blur(y, rows, cols, &taps));
    let (exx, eyy, exy) = (
        blur(&xx, rows, cols, &taps),
        blur(&yy, rows, cols, &taps),
        blur(&xy, rows, cols, &taps),
    );
    let mut total = 0.0;
    for i in 0..rows * cols {
        let (a, b) = (mx[i], my[i]);
        let sxx = exx[i] - a * a;
        let syy = eyy[i] - b * b;
        let sxy = exy[i] - a * b;
        total += ((2.0 * a * b + SSIM_C1) * (2.0 * sxy + SSIM_C2))
            / ((a * a + b * b + SSIM_C1) * (sxx + syy + SSIM_C2));
    }
    total / (rows * cols) as f64
}

/// Factor that maps the larger of the two image maxima to 255 (1 if both are
/// all zero).
pub fn ssim_scale<T: Scalar>(reference: &Image<T>, test: &Image<T>) -> f64 {
    let peak = reference.max_value().wide().max(test.max_value().wide());
    if peak > 0.0 {
        SSIM_RANGE / peak
    } else {
        1.0
    }
}

/// SSIM after a common rescale into `[0, 255]`. Returns `(ssim, scale)`.
pub fn ssim_rescaled<T: Scalar>(reference: &Image<T>, test: &Image<T>) -> Result<(f64, f64)> {
    check_dims(reference.dims(), test.dims())?;
    let s = ssim_scale(reference, test);
    let x: Vec<f64> = reference.pixels().iter().map(|p| p.wide() * s).collect();
    let y: Vec<f64> = test.pixels().iter().map(|p| p.wide() * s).collect();
    Ok((ssim_values(&x, &y, reference.rows(), reference.cols()), s))
}

/// Top-left 20x20 background region, clipped to the image.
pub fn default_background(dims: (usize, usize)) -> Roi {
    Roi::new(
        0,
        0,
        BACKGROUND_SIDE.min(dims.0),
        BACKGROUND_SIDE.min(dims.1),
    )
}

/// Ten equally spaced squares down the vertical midline.
pub fn auto_rois(dims: (usize, usize)) -> Vec<Roi> {
    let (rows, cols) = dims;
    let side = AUTO_ROI_SIDE.min(rows / AUTO_ROI_COUNT).min(cols).max(1);
    let side_r = side.min(rows);
    let left = (cols / 2).saturating_sub(side / 2).min(cols - side);
    (0..AUTO_ROI_COUNT)
        .map(|i| {
            let centre = ((i as f64 + 0.5) * rows as f64 / AUTO_ROI_COUNT as f64) as usize;
            let top = centre.saturating_sub(side_r / 2).min(rows - side_r);
            Roi::new(top, left, side_r, side)
        })
        .collect()
}

/// Which metrics a report should hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSet {
    pub snr: bool,
    pub cnr: bool,
    pub epi: bool,
    pub ssim: bool,
}

impl Default for MetricSet {
    fn default() -> Self {
        Self::ALL
    }
}

impl MetricSet {
    pub const ALL: Self = Self {
        snr: true,
        cnr: true,
        epi: true,
        ssim: true,
    };

    pub fn needs_reference(&self) -> bool {
        self.epi || self.ssim
    }
}

impl std::str::FromStr for MetricSet {
    type Err = Error;
    /// Comma-separated subset of `snr,cnr,epi,ssim`, or `all`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Self::ALL);
        }
        let mut set = Self {
            snr: false,
            cnr: false,
            epi: false,
            ssim: false,
        };
        for part in s.split(',').map(str::trim) {
            match part {
                "snr" => set.snr = true,
                "cnr" => set.cnr = true,
                "epi" => set.epi = true,
                "ssim" => set.ssim = true,
                _ => return Err(Error::InvalidParameter(format!("unknown metric {part:?}"))),
            }
        }
        Ok(set)
    }
}

/// Named metric values for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub image: String,
    pub snr_db: Option<f64>,
    pub cnr: Option<f64>,
    pub epi: Option<f64>,
    pub ssim: Option<f64>,
    pub roi_count: usize,
    pub roi_contributions: Vec<f64>,
    /// Factor applied to both images before SSIM.
    pub ssim_scale: Option<f64>,
}

impl MetricsReport {
    /// Evaluate `which` on `img`. EPI and SSIM compare against `reference`.
    pub fn compute<T: Scalar>(
        name: &str,
        img: &Image<T>,
        reference: Option<&Image<T>>,
        background: &Roi,
        rois: &[Roi],
        which: MetricSet,
    ) -> Result<Self> {
        if which.needs_reference() && reference.is_none() {
            return Err(Error::InvalidParameter(
                "EPI and SSIM need a reference image".into(),
            ));
        }
        let snr_db = which.snr.then(|| snr(img, background)).transpose()?;
        let roi_contributions = if which.cnr {
            cnr_contributions(img, rois, background)?
        } else {
            Vec::new()
        };
        let cnr = which
            .cnr
            .then(|| roi_contributions.iter().sum::<f64>() / roi_contributions.len() as f64);
        let epi = match reference {
            Some(r) if which.epi => Some(epi(r, img)?),
            _ => None,
        };
        let (ssim, ssim_scale) = match reference {
            Some(r) if which.ssim => {
                let (v, s) = ssim_rescaled(r, img)?;
                (Some(v), Some(s))
            }
            _ => (None, None),
        };
        Ok(Self {
            image: name.to_string(),
            snr_db,
            cnr,
            epi,
            ssim,
            roi_count: rois.len(),
            roi_contributions,
            ssim_scale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_twenty_db() {
        // background alternates 0.1 / -0.1 around 0.5: variance 0.01
        let img = Image::<f64>::from_fn(4, 4, |r, c| {
            if r < 2 && c < 2 {
                if (r + c) % 2 == 0 {
                    0.6
                } else {
                    0.4
                }
            } else if r == 3 && c == 3 {
                1.0
            } else {
                0.2
            }
        })
        .unwrap();
        let v = snr(&img, &Roi::new(0, 0, 2, 2)).unwrap();
        assert!((v - 20.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn snr_zero_db_and_degenerate() {
        let img = Image::<f64>::new(1, 3, vec![0.0, 2.0, 1.0]).unwrap();
        // background {0, 2}: variance 1; max outside is 1
        assert!(snr(&img, &Roi::new(0, 0, 1, 2)).unwrap().abs() < 1e-12);
        let flat = Image::<f64>::filled(3, 3, 0.5).unwrap();
        assert!(matches!(
            snr(&flat, &Roi::new(0, 0, 2, 2)),
            Err(Error::DegenerateBackground)
        ));
    }

    #[test]
    fn cnr_arithmetic() {
        // ROI {0, 4} (mean 2, var 4) against background {-1, 1}... kept >= 0:
        // background {1, 3}: mean 2, var 1
        let img = Image::<f64>::new(1, 4, vec![1.0, 3.0, 0.0, 4.0]).unwrap();
        let bg = Roi::new(0, 0, 1, 2);
        assert_eq!(cnr(&img, &[Roi::new(0, 2, 1, 2)], &bg).unwrap(), 0.0);
        // mu_r = 4, mu_b = 2, var_r + var_b = 4 -> 1
        let img =
            Image::<f64>::new(1, 4, vec![1.0, 3.0, 4.0 - 3f64.sqrt(), 4.0 + 3f64.sqrt()]).unwrap();
        let v = cnr(&img, &[Roi::new(0, 2, 1, 2)], &bg).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn cnr_errors() {
        let img = Image::<f64>::filled(2, 2, 1.0).unwrap();
        let bg = Roi::new(0, 0, 1, 1);
        assert!(matches!(
            cnr(&img, &[Roi::new(1, 1, 1, 1)], &bg),
            Err(Error::DegenerateRoi { index: 0 })
        ));
        assert!(cnr(&img, &[], &bg).is_err());
        assert!(cnr(&img, &[Roi::new(1, 1, 2, 2)], &bg).is_err());
    }

    #[test]
    fn epi_identities() {
        let f = Image::<f64>::from_fn(8, 9, |r, c| ((r * 7 + c * 3) % 5) as f64 + 0.5).unwrap();
        assert_eq!(epi(&f, &f).unwrap(), 1.0);
        let g = Image::<f64>::from_fn(8, 9, |r, c| 3.0 * f.get(r, c) + 2.0).unwrap();
        assert!((epi(&f, &g).unwrap() - 1.0).abs() < 1e-12);
        let m = f.pixels().iter().sum::<f64>() / f.len() as f64;
        let h = Image::<f64>::from_fn(8, 9, |r, c| 2.0 * m - f.get(r, c) + 10.0).unwrap();
        assert!((epi(&f, &h).unwrap() + 1.0).abs() < 1e-12);
        let flat = Image::<f64>::filled(8, 9, 1.0).unwrap();
        assert!(matches!(epi(&f, &flat), Err(Error::NoEdgeContent)));
    }

    #[test]
    fn ssim_constant_closed_form() {
        let a = Image::<f64>::filled(16, 16, 128.0).unwrap();
        let b = Image::<f64>::filled(16, 16, 138.0).unwrap();
        let expect =
            (2.0 * 128.0 * 138.0 + SSIM_C1) / (128.0f64.powi(2) + 138.0f64.powi(2) + SSIM_C1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-12);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_rescale_records_scale() {
        let a = Image::<f64>::from_fn(12, 12, |r, c| (r * c) as f64 / 121.0).unwrap();
        let (v, s) = ssim_rescaled(&a, &a).unwrap();
        assert_eq!(s, 255.0);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auto_roi_layout() {
        let rois = auto_rois((400, 300));
        assert_eq!(rois.len(), 10);
        for (i, r) in rois.iter().enumerate() {
            assert_eq!((r.height, r.width), (20, 20));
            assert_eq!(r.left, 140);
            assert_eq!(r.top, 40 * i + 10);
            r.validate((400, 300)).unwrap();
        }
        for dims in [(1, 1), (5, 3), (15, 40), (400, 7)] {
            assert!(
                auto_rois(dims).iter().all(|r| r.validate(dims).is_ok()),
                "{dims:?}"
            );
        }
        assert_eq!(default_background((10, 50)), Roi::new(0, 0, 10, 20));
    }

    #[test]
    fn metric_set_parsing() {
        let s: MetricSet = "snr,cnr".parse().unwrap();
        assert!(s.snr && s.cnr && !s.epi && !s.ssim && !s.needs_reference());
        assert!("snr,psnr".parse::<MetricSet>().is_err());
    }
}
