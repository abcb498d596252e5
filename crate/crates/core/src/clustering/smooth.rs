use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LabelMap;
use crate::error::Error;
use crate::image::WindowSpec;

/// Neighbourhood rule for [`label_smooth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothMode {
    /// Largest label index in the window.
    Max,
    /// Most frequent label in the window, ties to the lowest label.
    #[default]
    Majority,
}

impl std::str::FromStr for SmoothMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "max" => Ok(Self::Max),
            "majority" => Ok(Self::Majority),
            _ => Err(Error::InvalidParameter(format!(
                "smooth mode must be max or majority, got {s:?}"
            ))),
        }
    }
}

impl std::fmt::Display for SmoothMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::Majority => "majority",
        })
    }
}

/// Replace each label by the max or majority label of its border-clipped
/// window.
pub fn label_smooth(lm: &LabelMap, w: WindowSpec, mode: SmoothMode) -> LabelMap {
    let (rows, cols) = lm.dims();
    let k = lm.k() as usize;
    let src = lm.labels();
    let mut out = vec![0u8; rows * cols];
    out.par_chunks_mut(cols).enumerate().for_each(|(r, row)| {
        let mut hist = vec![0u32; k + 1];
        for (c, o) in row.iter_mut().enumerate() {
            let (r0, r1, c0, c1) = w.clipped(r, c, (rows, cols));
            *o = match mode {
                SmoothMode::Max => (r0..r1)
                    .map(|rr| {
                        src[rr * cols + c0..rr * cols + c1]
                            .iter()
                            .copied()
                            .max()
                            .unwrap()
                    })
                    .max()
                    .unwrap(),
                SmoothMode::Majority => {
                    hist.iter_mut().for_each(|h| *h = 0);
                    for rr in r0..r1 {
                        for &l in &src[rr * cols + c0..rr * cols + c1] {
                            hist[l as usize] += 1;
                        }
                    }
                    let mut best = 1;
                    for l in 2..=k {
                        if hist[l] > hist[best] {
                            best = l;
                        }
                    }
                    best as u8
                }
            };
        }
    });
    LabelMap::new(rows, cols, out, lm.k()).expect("smoothing keeps labels in range")
}
