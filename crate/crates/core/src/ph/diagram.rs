use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (dimension, birth, death) triple. `death == None` means the class never dies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    pub death: Option<f64>,
}

impl PersistencePair {
    pub fn is_infinite(&self) -> bool {
        self.death.is_none()
    }

    pub fn is_zero_length(&self) -> bool {
        self.death == Some(self.birth)
    }

    /// `death - birth`, with infinite classes truncated at `eps_max`.
    pub fn lifespan(&self, eps_max: f64) -> f64 {
        match self.death {
            Some(d) => d - self.birth,
            None => eps_max - self.birth,
        }
    }

    pub fn alive_at(&self, eps: f64) -> bool {
        self.birth <= eps && self.death.is_none_or(|d| eps < d)
    }
}

/// Persistence pairs over Z/2 of a filtration truncated at `eps_max`.
///
/// Pairs in dimension `max_dim` describe the truncated skeleton only (no
/// higher simplices exist to kill them), so threshold queries stop below it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    #[serde(default)]
    pub eps_max: f64,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    pub pairs: Vec<PersistencePair>,
}

fn default_max_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifespanStats {
    pub mean: f64,
    pub std: f64,
    pub lifespans: Vec<f64>,
}

impl PersistenceDiagram {
    pub fn new(mut pairs: Vec<PersistencePair>, eps_max: f64, max_dim: usize) -> Self {
        pairs.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(a.birth.total_cmp(&b.birth))
                .then(match (a.death, b.death) {
                    (Some(x), Some(y)) => x.total_cmp(&y),
                    (Some(_), None) => std::cmp::Ordering::Less,
                    (None, Some(_)) => std::cmp::Ordering::Greater,
                    (None, None) => std::cmp::Ordering::Equal,
                })
        });
        Self {
            eps_max,
            max_dim,
            pairs,
        }
    }

    /// Every stored pair, zero-length ones included.
    pub fn all_pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    /// Pairs with positive lifespan (the default view).
    pub fn pairs(&self) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(|p| !p.is_zero_length())
    }

    pub fn pairs_in_dim(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> {
        self.pairs().filter(move |p| p.dim == dim)
    }

    pub fn infinite_count(&self, dim: usize) -> usize {
        self.pairs_in_dim(dim).filter(|p| p.is_infinite()).count()
    }

    /// Highest dimension with trustworthy homology (one below the skeleton).
    pub fn homology_dims(&self) -> usize {
        self.max_dim.max(1)
    }

    /// β_p of the complex at scale `eps`.
    pub fn betti_at(&self, eps: f64, p: usize) -> usize {
        self.pairs_in_dim(p).filter(|q| q.alive_at(eps)).count()
    }

    pub fn lifespan_stats(&self, p: usize) -> Result<LifespanStats> {
        let lifespans: Vec<f64> = self
            .pairs_in_dim(p)
            .map(|q| q.lifespan(self.eps_max))
            .collect();
        if lifespans.is_empty() {
            return Err(Error::EmptyDimension(p));
        }
        let (mean, std) = mean_std(&lifespans);
        Ok(LifespanStats {
            mean,
            std,
            lifespans,
        })
    }

    /// Multiplies every birth, death and `eps_max` by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let pairs = self
            .pairs
            .iter()
            .map(|p| PersistencePair {
                dim: p.dim,
                birth: p.birth * s,
                death: p.death.map(|d| d * s),
            })
            .collect();
        Self::new(pairs, self.eps_max * s, self.max_dim)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(s)?;
        if let Some(bad) = d.pairs.iter().find(|p| p.death.is_some_and(|x| x < p.birth)) {
            return Err(Error::Parse(format!("pair {bad:?} dies before it is born")));
        }
        Ok(d)
    }
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Betti numbers indexed by dimension. Missing trailing dimensions read as 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BettiProfile {
    pub betti: Vec<usize>,
}

impl BettiProfile {
    pub fn new(betti: Vec<usize>) -> Self {
        Self { betti }
    }

    pub fn b0b1(b0: usize, b1: usize) -> Self {
        Self {
            betti: vec![b0, b1],
        }
    }

    pub fn get(&self, p: usize) -> usize {
        self.betti.get(p).copied().unwrap_or(0)
    }

    pub fn b0(&self) -> usize {
        self.get(0)
    }

    pub fn b1(&self) -> usize {
        self.get(1)
    }

    /// Dimension-wise maximum, padded to the longer profile.
    pub fn max_with(&self, other: &Self) -> Self {
        let n = self.betti.len().max(other.betti.len());
        Self {
            betti: (0..n).map(|p| self.get(p).max(other.get(p))).collect(),
        }
    }
}

impl std::fmt::Display for BettiProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.betti.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}
