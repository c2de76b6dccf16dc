//! Vietoris-Rips filtrations.
//!
//! Simplices are enumerated by incremental lower-neighbor expansion: every
//! simplex is grown from its largest vertex by repeatedly intersecting
//! lower-neighbor lists. A simplex enters the filtration at its diameter.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::cloud::PointCloud;
use crate::error::{Error, Result};

/// Highest simplex dimension the builder supports.
pub const MAX_SIMPLEX_DIM: usize = 3;

/// Default cap on the number of simplices a complex may hold.
pub const DEFAULT_SIMPLEX_BUDGET: u64 = 50_000_000;

const MAX_VERTS: usize = MAX_SIMPLEX_DIM + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    verts: [u32; MAX_VERTS],
    len: u8,
    value: f64,
}

impl Simplex {
    /// Builds a simplex from a vertex list. Vertices must be strictly increasing.
    pub fn new(vertices: &[u32], value: f64) -> Result<Self> {
        if vertices.is_empty() || vertices.len() > MAX_VERTS {
            return Err(Error::MalformedComplex(format!(
                "simplex with {} vertices is outside the supported range 1..={MAX_VERTS}",
                vertices.len()
            )));
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedComplex(format!(
                "simplex vertices {vertices:?} are not strictly increasing"
            )));
        }
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::MalformedComplex(format!(
                "simplex {vertices:?} has invalid filtration value {value}"
            )));
        }
        Ok(Self::from_sorted(vertices, value))
    }

    fn from_sorted(vertices: &[u32], value: f64) -> Self {
        let mut verts = [0u32; MAX_VERTS];
        verts[..vertices.len()].copy_from_slice(vertices);
        Self {
            verts,
            len: vertices.len() as u8,
            value,
        }
    }

    pub fn vertices(&self) -> &[u32] {
        &self.verts[..self.len as usize]
    }

    pub fn dim(&self) -> usize {
        self.len as usize - 1
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Codimension-one faces, each as a sorted vertex list.
    pub fn faces(&self) -> impl Iterator<Item = ([u32; MAX_VERTS], usize)> + '_ {
        let n = self.len as usize;
        let count = if n > 1 { n } else { 0 };
        (0..count).map(move |skip| {
            let mut out = [0u32; MAX_VERTS];
            let mut k = 0;
            for (i, &v) in self.vertices().iter().enumerate() {
                if i != skip {
                    out[k] = v;
                    k += 1;
                }
            }
            (out, n - 1)
        })
    }

    pub(crate) fn key(&self) -> u128 {
        vertex_key(self.vertices())
    }

    /// Filtration order: value, then dimension, then lexicographic vertices.
    pub fn filtration_cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.len.cmp(&other.len))
            .then_with(|| self.vertices().cmp(other.vertices()))
    }
}

pub(crate) fn vertex_key(vertices: &[u32]) -> u128 {
    vertices
        .iter()
        .enumerate()
        .fold(0u128, |acc, (i, &v)| acc | (u128::from(v) + 1) << (32 * i))
}

/// Simplices listed in filtration order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    simplices: Vec<Simplex>,
    max_dim: usize,
    eps_max: f64,
}

impl FilteredComplex {
    /// Wraps an explicit simplex list. No ordering or closure checks are made
    /// here; [`FilteredComplex::validate`] performs them.
    pub fn from_simplices(simplices: Vec<Simplex>, max_dim: usize, eps_max: f64) -> Self {
        Self {
            simplices,
            max_dim,
            eps_max,
        }
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    /// Number of simplices per dimension, indexed by dimension.
    pub fn counts_by_dim(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.max_dim + 1];
        for s in &self.simplices {
            if s.dim() >= counts.len() {
                counts.resize(s.dim() + 1, 0);
            }
            counts[s.dim()] += 1;
        }
        counts
    }

    /// Checks filtration order, face closure, and value monotonicity, and
    /// returns the vertex-key index used by the reduction.
    pub fn validate(&self) -> Result<HashMap<u128, u32>> {
        if self.simplices.len() > u32::MAX as usize {
            return Err(Error::MalformedComplex("too many simplices".into()));
        }
        let mut index: HashMap<u128, u32> = HashMap::with_capacity(self.simplices.len());
        for (i, s) in self.simplices.iter().enumerate() {
            if s.dim() > self.max_dim {
                return Err(Error::MalformedComplex(format!(
                    "simplex {:?} exceeds max_dim {}",
                    s.vertices(),
                    self.max_dim
                )));
            }
            if i > 0 && self.simplices[i - 1].filtration_cmp(s) != Ordering::Less {
                return Err(Error::MalformedComplex(format!(
                    "simplex {:?} at position {i} is out of filtration order",
                    s.vertices()
                )));
            }
            for (face, len) in s.faces() {
                let key = vertex_key(&face[..len]);
                let Some(&fi) = index.get(&key) else {
                    return Err(Error::MalformedComplex(format!(
                        "face {:?} of simplex {:?} is missing or appears later",
                        &face[..len],
                        s.vertices()
                    )));
                };
                if self.simplices[fi as usize].value > s.value {
                    return Err(Error::MalformedComplex(format!(
                        "simplex {:?} enters before its face {:?}",
                        s.vertices(),
                        &face[..len]
                    )));
                }
            }
            index.insert(s.key(), i as u32);
        }
        Ok(index)
    }
}

/// Builds the Vietoris-Rips filtration of `cloud` up to scale `eps_max`,
/// with simplices of dimension at most `max_dim`, under the default budget.
pub fn build_rips(cloud: &PointCloud, eps_max: f64, max_dim: usize) -> Result<FilteredComplex> {
    build_rips_with_budget(cloud, eps_max, max_dim, DEFAULT_SIMPLEX_BUDGET)
}

pub fn build_rips_with_budget(
    cloud: &PointCloud,
    eps_max: f64,
    max_dim: usize,
    budget: u64,
) -> Result<FilteredComplex> {
    if !(eps_max > 0.0) || !eps_max.is_finite() {
        return Err(Error::InvalidInput(format!(
            "eps_max must be positive and finite, got {eps_max}"
        )));
    }
    if !(1..=MAX_SIMPLEX_DIM).contains(&max_dim) {
        return Err(Error::InvalidInput(format!(
            "max_dim must lie in 1..={MAX_SIMPLEX_DIM}, got {max_dim}"
        )));
    }
    if cloud.len() > u32::MAX as usize - 1 {
        return Err(Error::SizeLimit {
            n: cloud.len(),
            max: u32::MAX as usize - 1,
        });
    }

    let lower = lower_neighbors(cloud, eps_max);

    let mut count = 0u64;
    expand(cloud, &lower, max_dim, &mut |_, _| count += 1);
    if count > budget {
        return Err(Error::BudgetExceeded { count, budget });
    }

    let mut simplices = Vec::with_capacity(count as usize);
    expand(cloud, &lower, max_dim, &mut |verts, value| {
        simplices.push(Simplex::from_sorted(verts, value));
    });
    simplices.sort_unstable_by(Simplex::filtration_cmp);

    Ok(FilteredComplex {
        simplices,
        max_dim,
        eps_max,
    })
}

/// For every vertex, the ascending list of smaller-indexed vertices within `eps`.
fn lower_neighbors(cloud: &PointCloud, eps: f64) -> Vec<Vec<u32>> {
    let n = cloud.len();
    (0..n)
        .map(|v| {
            (0..v)
                .filter(|&u| cloud.distance(u, v) <= eps)
                .map(|u| u as u32)
                .collect()
        })
        .collect()
}

fn expand(
    cloud: &PointCloud,
    lower: &[Vec<u32>],
    max_dim: usize,
    emit: &mut dyn FnMut(&[u32], f64),
) {
    let mut stack = [0u32; MAX_VERTS];
    for v in 0..lower.len() {
        // vertices are grown downward from the top vertex, so `stack` holds
        // them in descending order; reverse into ascending order for output
        stack[0] = v as u32;
        emit(&[v as u32], 0.0);
        if max_dim >= 1 {
            grow(cloud, lower, max_dim, &mut stack, 1, &lower[v], 0.0, emit);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn grow(
    cloud: &PointCloud,
    lower: &[Vec<u32>],
    max_dim: usize,
    stack: &mut [u32; MAX_VERTS],
    depth: usize,
    candidates: &[u32],
    value: f64,
    emit: &mut dyn FnMut(&[u32], f64),
) {
    let mut asc = [0u32; MAX_VERTS];
    for &u in candidates {
        let diam = stack[..depth]
            .iter()
            .map(|&w| cloud.distance(u as usize, w as usize))
            .fold(value, f64::max);
        stack[depth] = u;
        let len = depth + 1;
        for i in 0..len {
            asc[i] = stack[len - 1 - i];
        }
        emit(&asc[..len], diam);
        if len <= max_dim {
            let next = intersect_sorted(candidates, &lower[u as usize]);
            if !next.is_empty() {
                grow(cloud, lower, max_dim, stack, len, &next, diam, emit);
            }
        }
    }
}

fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
