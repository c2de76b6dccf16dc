use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cloud::{euclidean, PointCloud};
use crate::error::{Error, Result};

/// How a large cloud is reduced before building a Rips complex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Subsample {
    All,
    /// Greedy farthest-point (max-min) landmarks, seeded at point 0.
    MaxMin { count: usize },
    Random { count: usize, seed: u64 },
    /// Nodes of a square lattice with spacing `pitch` lying within
    /// `reach * pitch` of some point.
    Lattice { pitch: f64, reach: f64 },
}

impl Default for Subsample {
    fn default() -> Self {
        Subsample::MaxMin { count: 300 }
    }
}

impl Subsample {
    /// `all`, `maxmin:<count>`, `random:<count>:<seed>` or
    /// `lattice:<pitch>[:<reach>]` (reach defaults to 1.5).
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::InvalidInput(format!("bad subsample {s:?}"));
        let num = |i: usize| -> Result<f64> { parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let int = |i: usize| -> Result<u64> { parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let out = match (parts[0], parts.len()) {
            ("all", 1) => Subsample::All,
            ("maxmin", 2) => Subsample::MaxMin { count: int(1)? as usize },
            ("random", 3) => Subsample::Random {
                count: int(1)? as usize,
                seed: int(2)?,
            },
            ("lattice", 2) => Subsample::Lattice {
                pitch: num(1)?,
                reach: 1.5,
            },
            ("lattice", 3) => Subsample::Lattice {
                pitch: num(1)?,
                reach: num(2)?,
            },
            _ => return Err(bad()),
        };
        if let Subsample::Lattice { pitch, reach } = out {
            if !(pitch > 0.0) || !(reach >= 0.5) {
                return Err(bad());
            }
        }
        Ok(out)
    }

    /// Indices of the retained points. Lattice covers do not retain input
    /// points and return the indices of the points nearest each node.
    pub fn indices(&self, cloud: &PointCloud) -> Vec<usize> {
        match *self {
            Subsample::All => (0..cloud.len()).collect(),
            Subsample::Lattice { .. } => {
                let Ok(nodes) = self.apply(cloud) else {
                    return Vec::new();
                };
                let mut idx: Vec<usize> = nodes
                    .points()
                    .map(|q| {
                        (0..cloud.len())
                            .min_by(|&a, &b| {
                                euclidean(q, cloud.point(a)).total_cmp(&euclidean(q, cloud.point(b)))
                            })
                            .unwrap_or(0)
                    })
                    .collect();
                idx.sort_unstable();
                idx.dedup();
                idx
            }
            Subsample::MaxMin { count } => maxmin_landmarks(cloud, count),
            Subsample::Random { count, seed } => {
                if count >= cloud.len() {
                    return (0..cloud.len()).collect();
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut idx = sample(&mut rng, cloud.len(), count).into_vec();
                idx.sort_unstable();
                idx
            }
        }
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        match *self {
            Subsample::All => Ok(cloud.clone()),
            Subsample::Lattice { pitch, reach } => lattice_cover(cloud, pitch, reach),
            _ => cloud.select(&self.indices(cloud)),
        }
    }
}

/// Lattice nodes (spacing `pitch`) within `reach * pitch` of at least one
/// point, in lexicographic node order. Supports dimensions up to 3.
pub fn lattice_cover(cloud: &PointCloud, pitch: f64, reach: f64) -> Result<PointCloud> {
    if !(pitch > 0.0 && pitch.is_finite()) || !(reach >= 0.5 && reach.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lattice needs pitch > 0 and reach >= 0.5, got {pitch} and {reach}"
        )));
    }
    let d = cloud.dim();
    if d > 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let span = reach.ceil() as i64;
    let r2 = reach * reach;
    let mut nodes = std::collections::BTreeSet::new();
    let mut offsets = vec![Vec::new()];
    for _ in 0..d {
        offsets = offsets
            .into_iter()
            .flat_map(|o: Vec<i64>| {
                (-span..=span).map(move |k| {
                    let mut o = o.clone();
                    o.push(k);
                    o
                })
            })
            .collect();
    }
    for p in cloud.points() {
        let scaled: Vec<f64> = p.iter().map(|x| x / pitch).collect();
        let base: Vec<i64> = scaled.iter().map(|x| x.round() as i64).collect();
        for off in &offsets {
            let node: Vec<i64> = base.iter().zip(off).map(|(b, o)| b + o).collect();
            let dist2: f64 = node
                .iter()
                .zip(&scaled)
                .map(|(&n, &x)| (n as f64 - x).powi(2))
                .sum();
            if dist2 <= r2 {
                nodes.insert(node);
            }
        }
    }
    let coords = nodes
        .into_iter()
        .flat_map(|n| n.into_iter().map(move |k| k as f64 * pitch))
        .collect();
    PointCloud::from_flat(d, coords)
}

/// Farthest-point sampling. Returns indices in selection order.
pub fn maxmin_landmarks(cloud: &PointCloud, count: usize) -> Vec<usize> {
    let n = cloud.len();
    if count >= n {
        return (0..n).collect();
    }
    let mut chosen = Vec::with_capacity(count);
    let mut dist = vec![f64::INFINITY; n];
    let mut next = 0usize;
    for _ in 0..count {
        chosen.push(next);
        let anchor = cloud.point(next);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, d) in dist.iter_mut().enumerate() {
            let di = euclidean(anchor, cloud.point(i));
            if di < *d {
                *d = di;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        next = best.1;
    }
    chosen
}
