use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::anyhow;
use log::info;
use octd_core::metrics::{auto_rois, default_background, MetricSet};
use octd_core::optics::{synthesize_phantom, PhantomSpec};
use octd_core::pipeline::{run_cff, run_wiener, CffOutput};
use octd_core::{
    load_image, load_roi_list, save_image, save_labels, Error, ImageF64, MetricsReport, Roi,
    RunConfig,
};

use crate::report;
use crate::{CompareArgs, DespeckleArgs, Method, MetricsArgs, PhantomArgs, Preset, RunFlags};

/// An error with its process exit code: 2 for bad input or usage, 1 for
/// failures while processing or writing results.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            error: anyhow!(msg.into()),
        }
    }

    pub fn internal(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. }
            | Error::Format { .. }
            | Error::RoiSyntax { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidImage(_)
            | Error::InvalidParameter(_) => 2,
            Error::NoSignal
            | Error::DegenerateFeatures { .. }
            | Error::DegenerateBackground
            | Error::DegenerateRoi { .. }
            | Error::NoEdgeContent => 1,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn write_failed(e: impl Into<anyhow::Error>) -> CliError {
    CliError::internal(e.into())
}

fn load(path: &Path) -> CliResult<ImageF64> {
    Ok(load_image(path)?)
}

fn save(img: &ImageF64, path: &Path) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(write_failed)?;
    }
    save_image(img, path).map_err(write_failed)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `<dir>/<stem>_labels.pgm` beside an output image.
fn labels_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}_labels.pgm"))
}

pub(crate) fn resolve_config(flags: &RunFlags) -> CliResult<RunConfig> {
    let mut cfg = match &flags.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("invalid config {}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(k) = flags.k {
        cfg.k = k;
    }
    if let Some(w) = flags.window {
        cfg.window = w;
    }
    if let Some(w1) = flags.w1 {
        cfg.w1 = w1;
    }
    if let Some(w2) = flags.w2 {
        cfg.w2 = w2;
    }
    if let Some(s) = flags.smooth {
        cfg.smooth = s.into();
    }
    if let Some(n) = flags.sample_size {
        cfg.sample_size = n;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(v) = flags.noise_var {
        cfg.wiener_noise_var = Some(v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_comment(cfg: &RunConfig) -> String {
    format!(
        "config {}",
        serde_json::to_string(cfg).expect("config serializes")
    )
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn log_cff(out: &CffOutput<f64>) {
    let t = &out.timings;
    info!(
        "timings ms: attenuation {:.1}, features {:.1}, clustering {:.1}, smoothing {:.1}, filtering {:.1}, total {:.1}",
        ms(t.attenuation),
        ms(t.features),
        ms(t.clustering),
        ms(t.smoothing),
        ms(t.filtering),
        ms(t.total())
    );
    for c in &out.clusters {
        info!(
            "cluster {}: {} px, mean intensity {:.6}, mean attenuation {:.4}/mm, noise var {:.6e}",
            c.label, c.pixels, c.mean_intensity, c.mean_attenuation, c.noise_var
        );
    }
}

pub fn phantom(a: PhantomArgs) -> CliResult {
    let mut spec = match (a.preset, &a.spec) {
        (Some(Preset::FourLayer), _) => PhantomSpec::four_layer(a.rows, a.cols, 0),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<PhantomSpec>(&text).map_err(|e| {
                CliError::usage(format!("invalid phantom spec {}: {e}", path.display()))
            })?
        }
        (None, None) => return Err(CliError::usage("need a spec file or --preset")),
    };
    if let Some(seed) = a.seed {
        spec.rng_seed = seed;
    }
    let p = synthesize_phantom::<f64>(&spec)?;
    info!(
        "{} layers, boundaries at rows {:?}",
        spec.layers.len(),
        spec.boundary_rows()
    );
    save(&p.noisy, &with_suffix(&a.out, "_noisy.raw"))?;
    save(&p.clean, &with_suffix(&a.out, "_clean.raw"))?;
    let truth = with_suffix(&a.out, "_truth.pgm");
    save_labels(&p.truth, &truth).map_err(write_failed)?;
    info!("wrote {}", truth.display());
    Ok(())
}

pub fn despeckle(a: DespeckleArgs) -> CliResult {
    let img = load(&a.input)?;
    let cfg = resolve_config(&a.run)?;
    match a.method {
        Method::Wiener => {
            let t = std::time::Instant::now();
            let (out, nv) = run_wiener(&img, &cfg);
            info!("wiener: noise var {nv:.6e}, {:.1} ms", ms(t.elapsed()));
            save(&out, &a.output)
        }
        Method::Cff => {
            let out = run_cff(&img, &cfg)?;
            log_cff(&out);
            save(&out.filtered, &a.output)?;
            let lp = labels_path(&a.output);
            save_labels(&out.labels, &lp).map_err(write_failed)?;
            info!("wrote {}", lp.display());
            Ok(())
        }
    }
}

/// Background and CNR regions: from a ROI file (first line is the
/// background) or the automatic layout.
fn regions(roi: Option<&Path>, dims: (usize, usize)) -> CliResult<(Roi, Vec<Roi>)> {
    let Some(path) = roi else {
        return Ok((default_background(dims), auto_rois(dims)));
    };
    let mut list = load_roi_list(path)?;
    if list.len() < 2 {
        return Err(CliError::usage(format!(
            "{}: need a background line plus at least one ROI, found {} entries",
            path.display(),
            list.len()
        )));
    }
    for r in &list {
        r.validate(dims)?;
    }
    let bg = list.remove(0);
    Ok((bg, list))
}

fn display_name(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn metrics(a: MetricsArgs) -> CliResult {
    let which = match &a.metrics {
        Some(s) => s.parse::<MetricSet>()?,
        None if a.reference.is_some() => MetricSet::ALL,
        None => MetricSet {
            snr: true,
            cnr: true,
            epi: false,
            ssim: false,
        },
    };
    if which.needs_reference() && a.reference.is_none() {
        return Err(CliError::usage("EPI and SSIM need --ref"));
    }
    let reference = a.reference.as_deref().map(load).transpose()?;
    let mut rows = Vec::new();
    for path in &a.images {
        let img = load(path)?;
        let (bg, rois) = regions(a.roi.as_deref(), img.dims())?;
        rows.push(MetricsReport::compute(
            &display_name(path),
            &img,
            reference.as_ref(),
            &bg,
            &rois,
            which,
        )?);
    }
    let mut comments = vec![format!("octd {} metrics", env!("CARGO_PKG_VERSION"))];
    if let Some(r) = &a.reference {
        comments.push(format!("reference {}", r.display()));
    }
    report::append(a.csv.as_deref(), &comments, &rows).map_err(CliError::internal)
}

/// `<dir>/<x>_clean.<ext>` for an input named `<x>_noisy.<ext>`, if present.
fn sibling_clean(input: &Path) -> Option<PathBuf> {
    let name = input.file_name()?.to_str()?;
    let (stem, ext) = match name.rsplit_once('.') {
        Some((s, e)) => (s, Some(e)),
        None => (name, None),
    };
    let base = stem.strip_suffix("_noisy")?;
    let clean = match ext {
        Some(e) => format!("{base}_clean.{e}"),
        None => format!("{base}_clean"),
    };
    let p = input.with_file_name(clean);
    p.exists().then_some(p)
}

fn weight_grid() -> Vec<(f64, f64)> {
    (0..=10)
        .map(|i| (i as f64 / 10.0, (10 - i) as f64 / 10.0))
        .collect()
}

pub fn compare(a: CompareArgs) -> CliResult {
    let img = load(&a.input)?;
    let ref_path = match a.reference.clone().or_else(|| sibling_clean(&a.input)) {
        Some(p) => p,
        None => {
            return Err(CliError::usage(format!(
                "no reference for {}: pass --ref (only *_noisy inputs with a *_clean sibling get one automatically)",
                a.input.display()
            )))
        }
    };
    let reference = load(&ref_path)?;
    if reference.dims() != img.dims() {
        return Err(CliError::usage(format!(
            "reference is {:?}, input is {:?}",
            reference.dims(),
            img.dims()
        )));
    }
    let cfg = resolve_config(&a.run)?;
    let (bg, rois) = regions(a.roi.as_deref(), img.dims())?;
    let all = MetricSet::ALL;
    let eval = |name: &str, x: &ImageF64| {
        MetricsReport::compute(name, x, Some(&reference), &bg, &rois, all)
    };

    let (wiener_img, nv) = run_wiener(&img, &cfg);
    let cff = run_cff(&img, &cfg)?;
    log_cff(&cff);

    let original = eval("original", &img)?;
    let wiener = eval("wiener", &wiener_img)?;
    let cff_row = eval("cff", &cff.filtered)?;
    let mut rows = vec![
        report::delta("delta_wiener", &wiener, &original),
        report::delta("delta_cff", &cff_row, &original),
    ];
    rows.splice(0..0, [original, wiener, cff_row]);

    let mut comments = vec![
        format!("octd {} compare", env!("CARGO_PKG_VERSION")),
        format!("input {}", a.input.display()),
        format!("reference {}", ref_path.display()),
        config_comment(&cfg),
        format!("wiener noise_var={nv}"),
    ];
    for c in &cff.clusters {
        comments.push(format!(
            "cluster label={} pixels={} mean_intensity={} mean_attenuation={} noise_var={}",
            c.label, c.pixels, c.mean_intensity, c.mean_attenuation, c.noise_var
        ));
    }

    if a.sweep_weights {
        fs::create_dir_all(&a.out_dir).map_err(write_failed)?;
        let stem = a
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        for (w1, w2) in weight_grid() {
            let sweep_cfg = RunConfig {
                w1,
                w2,
                ..cfg.clone()
            };
            let out = run_cff(&img, &sweep_cfg)?;
            let tag = format!("w1_{w1:.1}_w2_{w2:.1}");
            let lp = a.out_dir.join(format!("{stem}_labels_{tag}.pgm"));
            save_labels(&out.labels, &lp).map_err(write_failed)?;
            info!("sweep {tag}: wrote {}", lp.display());
            rows.push(eval(&format!("cff_{tag}"), &out.filtered)?);
        }
    }
    report::create(a.csv.as_deref(), &comments, &rows).map_err(CliError::internal)
}
