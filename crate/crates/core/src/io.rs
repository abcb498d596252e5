//! Image, label-map and ROI-list file formats.
//!
//! * Raw float: little-endian `f32`, row-major, with a `<stem>.hdr` sidecar of
//!   `key=value` lines (`rows`, `cols`, `axial_um`, `lateral_um`).
//! * PGM: binary `P5`, 8- or 16-bit (big-endian) samples, normalized to
//!   `[0, 1]` on load. An optional `.hdr` sidecar carries pixel spacing.
//! * ROI list: one `top left height width` per line, `#` comments.
//!
//! The format is chosen by extension: `.pgm` is PGM, anything else is raw
//! float.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::clustering::LabelMap;
use crate::error::{Error, Result};
use crate::image::{Image, Roi, DEFAULT_AXIAL_UM, DEFAULT_LATERAL_UM};
use crate::scalar::Scalar;

const PGM_MAXVAL_16: u32 = 65535;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    RawF32,
    Pgm16,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => ImageFormat::Pgm16,
            _ => ImageFormat::RawF32,
        }
    }
}

/// Sidecar header path for an image file.
pub fn header_path(path: &Path) -> PathBuf {
    path.with_extension("hdr")
}

#[derive(Debug, Default, Clone, PartialEq)]
struct Header {
    rows: Option<usize>,
    cols: Option<usize>,
    axial_um: Option<f64>,
    lateral_um: Option<f64>,
}

fn parse_header(path: &Path, text: &str) -> Result<Header> {
    let mut h = Header::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: expected key=value", n + 1)))?;
        let value = value.trim();
        let bad = || Error::format(path, format!("line {}: bad value {value:?}", n + 1));
        match key.trim() {
            "rows" => h.rows = Some(value.parse().map_err(|_| bad())?),
            "cols" => h.cols = Some(value.parse().map_err(|_| bad())?),
            "axial_um" => h.axial_um = Some(value.parse().map_err(|_| bad())?),
            "lateral_um" => h.lateral_um = Some(value.parse().map_err(|_| bad())?),
            // unknown keys are tolerated so other tools can annotate headers
            _ => {}
        }
    }
    Ok(h)
}

fn read_header(path: &Path) -> Result<Option<Header>> {
    let hdr = header_path(path);
    match fs::read_to_string(&hdr) {
        Ok(text) => parse_header(&hdr, &text).map(Some),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(hdr, e)),
    }
}

fn write_header<T: Scalar>(path: &Path, img: &Image<T>) -> Result<()> {
    let hdr = header_path(path);
    let text = format!(
        "rows={}\ncols={}\naxial_um={}\nlateral_um={}\n",
        img.rows(),
        img.cols(),
        img.axial_um(),
        img.lateral_um()
    );
    fs::write(&hdr, text).map_err(|e| Error::io(hdr, e))
}

/// Load an image, picking the format from the file extension.
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    match ImageFormat::from_path(path) {
        ImageFormat::RawF32 => load_raw(path),
        ImageFormat::Pgm16 => load_pgm(path),
    }
}

/// Save an image, picking the format from the file extension.
///
/// PGM output stores `round(v * 65535)` with values clamped to `[0, 1]`.
pub fn save_image<T: Scalar>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match ImageFormat::from_path(path) {
        ImageFormat::RawF32 => save_raw(img, path),
        ImageFormat::Pgm16 => save_pgm(img, path),
    }
}

fn load_raw<T: Scalar>(path: &Path) -> Result<Image<T>> {
    let header = read_header(path)?.ok_or_else(|| {
        Error::format(
            path,
            format!("missing header {}", header_path(path).display()),
        )
    })?;
    let rows = header
        .rows
        .ok_or_else(|| Error::format(header_path(path), "missing rows="))?;
    let cols = header
        .cols
        .ok_or_else(|| Error::format(header_path(path), "missing cols="))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != rows * cols * 4 {
        return Err(Error::format(
            path,
            format!(
                "header says {rows}x{cols} ({} bytes), payload has {} bytes",
                rows * cols * 4,
                bytes.len()
            ),
        ));
    }
    let pixels = bytes
        .chunks_exact(4)
        .map(|c| T::narrow(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Image::with_spacing(
        rows,
        cols,
        pixels,
        header.axial_um.unwrap_or(DEFAULT_AXIAL_UM),
        header.lateral_um.unwrap_or(DEFAULT_LATERAL_UM),
    )
    .map_err(|e| Error::format(path, e.to_string()))
}

fn save_raw<T: Scalar>(img: &Image<T>, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(img.len() * 4);
    for p in img.pixels() {
        bytes.extend_from_slice(&(p.wide() as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_header(path, img)
}

struct Pgm {
    width: usize,
    height: usize,
    maxval: u32,
    samples: Vec<u16>,
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String> {
        // skip whitespace and comments
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    if magic != "P5" {
        return Err(Error::format(
            path,
            format!("expected P5 magic, found {magic:?}"),
        ));
    }
    let num = |pos: &mut usize, what: &str| -> Result<u32> {
        let t = token(pos)?;
        t.parse()
            .map_err(|_| Error::format(path, format!("bad {what} {t:?}")))
    };
    let width = num(&mut pos, "width")? as usize;
    let height = num(&mut pos, "height")? as usize;
    let maxval = num(&mut pos, "maxval")?;
    if maxval == 0 || maxval > PGM_MAXVAL_16 {
        return Err(Error::format(
            path,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let bps = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bps;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < need {
        return Err(Error::format(
            path,
            format!(
                "raster holds {} bytes, {width}x{height} needs {need}",
                raster.len()
            ),
        ));
    }
    let samples = if bps == 1 {
        raster[..need].iter().map(|&b| b as u16).collect()
    } else {
        raster[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Pgm {
        width,
        height,
        maxval,
        samples,
    })
}

fn write_pgm(path: &Path, width: usize, height: usize, maxval: u32, samples: &[u16]) -> Result<()> {
    let mut out = Vec::with_capacity(32 + samples.len() * 2);
    write!(out, "P5\n{width} {height}\n{maxval}\n").expect("write to Vec");
    if maxval < 256 {
        out.extend(samples.iter().map(|&s| s as u8));
    } else {
        for s in samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn load_pgm<T: Scalar>(path: &Path) -> Result<Image<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let pgm = parse_pgm(path, &bytes)?;
    let header = read_header(path)?.unwrap_or_default();
    if let (Some(r), Some(c)) = (header.rows, header.cols) {
        if (r, c) != (pgm.height, pgm.width) {
            return Err(Error::format(
                path,
                format!(
                    "header says {r}x{c}, raster is {}x{}",
                    pgm.height, pgm.width
                ),
            ));
        }
    }
    let scale = pgm.maxval as f64;
    let pixels = pgm
        .samples
        .iter()
        .map(|&s| T::narrow(s as f64 / scale))
        .collect();
    Image::with_spacing(
        pgm.height,
        pgm.width,
        pixels,
        header.axial_um.unwrap_or(DEFAULT_AXIAL_UM),
        header.lateral_um.unwrap_or(DEFAULT_LATERAL_UM),
    )
    .map_err(|e| Error::format(path, e.to_string()))
}

fn save_pgm<T: Scalar>(img: &Image<T>, path: &Path) -> Result<()> {
    let max = PGM_MAXVAL_16 as f64;
    let samples: Vec<u16> = img
        .pixels()
        .iter()
        .map(|p| (p.wide().clamp(0.0, 1.0) * max).round() as u16)
        .collect();
    write_pgm(path, img.cols(), img.rows(), PGM_MAXVAL_16, &samples)?;
    write_header(path, img)
}

/// Write a label map as an 8-bit PGM whose pixel values are the labels.
pub fn save_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let samples: Vec<u16> = labels.labels().iter().map(|&l| l as u16).collect();
    write_pgm(path.as_ref(), labels.cols(), labels.rows(), 255, &samples)
}

/// Read an 8-bit label PGM. The cluster count is the largest label present.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let pgm = parse_pgm(path, &bytes)?;
    if pgm.maxval > 255 {
        return Err(Error::format(path, "label maps must be 8-bit"));
    }
    let labels: Vec<u8> = pgm.samples.iter().map(|&s| s as u8).collect();
    let k = labels.iter().copied().max().unwrap_or(1).max(1);
    LabelMap::new(pgm.height, pgm.width, labels, k).map_err(|e| Error::format(path, e.to_string()))
}

/// Parse an ROI list: `top left height width` per line, `#` starts a comment.
pub fn parse_roi_list(text: &str) -> Result<Vec<Roi>> {
    let mut rois = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::RoiSyntax {
                line: n + 1,
                reason: format!(
                    "expected 4 fields (top left height width), got {}",
                    fields.len()
                ),
            });
        }
        let mut v = [0usize; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| Error::RoiSyntax {
                line: n + 1,
                reason: format!("{f:?} is not a nonnegative integer"),
            })?;
        }
        if v[2] == 0 || v[3] == 0 {
            return Err(Error::RoiSyntax {
                line: n + 1,
                reason: "height and width must be >= 1".into(),
            });
        }
        rois.push(Roi::new(v[0], v[1], v[2], v[3]));
    }
    Ok(rois)
}

pub fn load_roi_list(path: impl AsRef<Path>) -> Result<Vec<Roi>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_roi_list(&text)
}
