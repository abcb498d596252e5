//! Ward minimum-variance agglomeration and nearest-centroid assignment.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{FeatureField, LabelMap};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_SIZE: usize = 2000;

/// One agglomeration step. `a` and `b` are point indices that represent the
/// two merged clusters; `dist` is the Lance-Williams Ward distance on squared
/// Euclidean input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub dist: f64,
}

fn sq_dist(p: &[f64; 2], q: &[f64; 2]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    dx * dx + dy * dy
}

/// Full Ward dendrogram of `points` via the nearest-neighbour chain, sorted by
/// merge distance (stable, so children precede parents on ties).
pub fn ward_linkage(points: &[[f64; 2]]) -> Vec<Merge> {
    let m = points.len();
    if m < 2 {
        return Vec::new();
    }
    let mut d = vec![0.0f64; m * m];
    d.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = sq_dist(&points[i], &points[j]);
        }
    });
    let mut size = vec![1usize; m];
    let mut active = vec![true; m];
    let mut merges = Vec::with_capacity(m - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(m);

    for _ in 0..m - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster"));
        }
        let (x, y) = loop {
            let x = *chain.last().unwrap();
            let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            // prefer the previous chain element on ties so the chain terminates
            let (mut nn, mut best) = match prev {
                Some(p) => (p, d[x * m + p]),
                None => (usize::MAX, f64::INFINITY),
            };
            let row = &d[x * m..(x + 1) * m];
            for (z, &dz) in row.iter().enumerate() {
                if z != x && active[z] && dz < best {
                    best = dz;
                    nn = z;
                }
            }
            if Some(nn) == prev {
                chain.pop();
                chain.pop();
                break (x, nn);
            }
            chain.push(nn);
        };

        let (keep, drop) = (x.min(y), x.max(y));
        let dxy = d[x * m + y];
        let (nx, ny) = (size[x] as f64, size[y] as f64);
        for z in 0..m {
            if !active[z] || z == x || z == y {
                continue;
            }
            let nz = size[z] as f64;
            let v =
                ((nx + nz) * d[x * m + z] + (ny + nz) * d[y * m + z] - nz * dxy) / (nx + ny + nz);
            d[keep * m + z] = v;
            d[z * m + keep] = v;
        }
        active[drop] = false;
        size[keep] += size[drop];
        merges.push(Merge {
            a: keep,
            b: drop,
            dist: dxy,
        });
    }
    merges.sort_by(|p, q| p.dist.total_cmp(&q.dist));
    merges
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Cut the Ward dendrogram of `points` at `k` clusters. Returns a 0-based
/// cluster id per point, numbered by first occurrence.
pub fn ward_partition(points: &[[f64; 2]], k: usize) -> Vec<usize> {
    let m = points.len();
    let merges = ward_linkage(points);
    let mut uf = UnionFind((0..m).collect());
    for mg in merges.iter().take(m.saturating_sub(k)) {
        uf.union(mg.a, mg.b);
    }
    let mut ids = vec![usize::MAX; m];
    let mut out = Vec::with_capacity(m);
    let mut next = 0;
    for i in 0..m {
        let r = uf.find(i);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        out.push(ids[r]);
    }
    out
}

fn distinct_points(points: &[[f64; 2]]) -> usize {
    let mut keys: Vec<(u64, u64)> = points
        .iter()
        .map(|p| ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Ward clustering of a seeded pixel sample, extended to the whole image by
/// nearest-centroid assignment. Label 1 is the cluster with the highest mean
/// intensity. `sample_size >= pixel count` clusters every pixel.
pub fn ward_cluster(
    ff: &FeatureField,
    k: usize,
    sample_size: usize,
    seed: u64,
) -> Result<LabelMap> {
    let n = ff.len();
    if k == 0 || k > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 1..=255, got {k}"
        )));
    }
    if sample_size < k {
        return Err(Error::InvalidParameter(format!(
            "sample_size {sample_size} is smaller than k = {k}"
        )));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds pixel count {n}"
        )));
    }

    let sample: Vec<usize> = if sample_size >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = index::sample(&mut rng, n, sample_size).into_vec();
        idx.sort_unstable();
        idx
    };
    let points: Vec<[f64; 2]> = sample.iter().map(|&i| ff.features[i]).collect();
    let distinct = distinct_points(&points);
    if distinct < k {
        return Err(Error::DegenerateFeatures { distinct, k });
    }

    let part = ward_partition(&points, k);
    let mut centroids = vec![[0.0f64; 2]; k];
    let mut sizes = vec![0usize; k];
    for (p, &c) in points.iter().zip(&part) {
        centroids[c][0] += p[0];
        centroids[c][1] += p[1];
        sizes[c] += 1;
    }
    for (c, &s) in centroids.iter_mut().zip(&sizes) {
        c[0] /= s as f64;
        c[1] /= s as f64;
    }

    let assign: Vec<usize> = ff
        .features
        .par_iter()
        .map(|f| {
            let mut best = 0;
            let mut bd = sq_dist(f, &centroids[0]);
            for (c, cen) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(f, cen);
                if d < bd {
                    bd = d;
                    best = c;
                }
            }
            best
        })
        .collect();

    let mut sum = vec![0.0f64; k];
    let mut count = vec![0usize; k];
    for (&c, &v) in assign.iter().zip(&ff.intensity) {
        sum[c] += v;
        count[c] += 1;
    }
    let mut order: Vec<usize> = (0..k).filter(|&c| count[c] > 0).collect();
    order.sort_by(|&a, &b| {
        let ma = sum[a] / count[a] as f64;
        let mb = sum[b] / count[b] as f64;
        mb.total_cmp(&ma)
    });
    let mut relabel = vec![0u8; k];
    for (rank, &c) in order.iter().enumerate() {
        relabel[c] = rank as u8 + 1;
    }
    let labels = assign.iter().map(|&c| relabel[c]).collect();
    LabelMap::new(ff.rows, ff.cols, labels, order.len() as u8)
}
