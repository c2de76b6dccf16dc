use serde::{Deserialize, Serialize};

use super::diagram::{mean_std, BettiProfile, PersistenceDiagram};
use crate::error::{Error, Result};

/// Rule deciding which persistence features count as real topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// Lifespan above mean + 2 standard deviations, per dimension.
    #[default]
    TwoSigma,
    /// Lifespan above a fixed scale.
    Absolute { eps: f64 },
    /// The `k` longest-lived features per dimension (ties at the cut kept).
    TopK { k: usize },
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdPolicy::TwoSigma => Ok(()),
            ThresholdPolicy::Absolute { eps } if !(eps >= 0.0) || !eps.is_finite() => Err(
                Error::InvalidPolicy(format!("absolute threshold must be >= 0, got {eps}")),
            ),
            ThresholdPolicy::TopK { k: 0 } => {
                Err(Error::InvalidPolicy("top-k requires k >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "two-sigma" {
            return Ok(ThresholdPolicy::TwoSigma);
        }
        if let Some(v) = s.strip_prefix("absolute:") {
            let eps = v
                .parse()
                .map_err(|_| Error::InvalidPolicy(format!("bad absolute threshold {v:?}")))?;
            let p = ThresholdPolicy::Absolute { eps };
            p.validate()?;
            return Ok(p);
        }
        if let Some(v) = s.strip_prefix("top-k:") {
            let k: i64 = v
                .parse()
                .map_err(|_| Error::InvalidPolicy(format!("bad k {v:?}")))?;
            if k <= 0 {
                return Err(Error::InvalidPolicy("top-k requires k >= 1".into()));
            }
            return Ok(ThresholdPolicy::TopK { k: k as usize });
        }
        Err(Error::InvalidPolicy(format!(
            "unknown policy {s:?}; expected two-sigma, absolute:<eps> or top-k:<k>"
        )))
    }
}

impl std::fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThresholdPolicy::TwoSigma => write!(f, "two-sigma"),
            ThresholdPolicy::Absolute { eps } => write!(f, "absolute:{eps}"),
            ThresholdPolicy::TopK { k } => write!(f, "top-k:{k}"),
        }
    }
}

/// Thresholded profile plus the lifespan cutoff applied in each dimension
/// (`None` where the dimension had no features).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholded {
    pub profile: BettiProfile,
    pub cutoffs: Vec<Option<f64>>,
}

/// Relative slack below which a lifespan is treated as tied with the cutoff.
const TIE_TOLERANCE: f64 = 1e-9;

pub fn threshold_features(
    diagram: &PersistenceDiagram,
    policy: ThresholdPolicy,
) -> Result<BettiProfile> {
    Ok(threshold_features_detailed(diagram, policy)?.profile)
}

pub fn threshold_features_detailed(
    diagram: &PersistenceDiagram,
    policy: ThresholdPolicy,
) -> Result<Thresholded> {
    policy.validate()?;
    let dims = diagram.homology_dims();
    let mut betti = Vec::with_capacity(dims);
    let mut cutoffs = Vec::with_capacity(dims);

    for p in 0..dims {
        let features: Vec<(f64, bool)> = diagram
            .pairs_in_dim(p)
            .map(|q| (q.lifespan(diagram.eps_max), q.is_infinite()))
            .collect();
        if features.is_empty() {
            betti.push(0);
            cutoffs.push(None);
            continue;
        }
        let lifespans: Vec<f64> = features.iter().map(|f| f.0).collect();
        let scale = lifespans.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
        let tol = TIE_TOLERANCE * scale;

        let (cutoff, inclusive) = match policy {
            ThresholdPolicy::TwoSigma => {
                let (mean, std) = mean_std(&lifespans);
                (mean + 2.0 * std, false)
            }
            ThresholdPolicy::Absolute { eps } => (eps, false),
            ThresholdPolicy::TopK { k } => {
                let mut sorted = lifespans.clone();
                sorted.sort_by(|a, b| b.total_cmp(a));
                (sorted[(k.min(sorted.len())) - 1], true)
            }
        };

        let count = features
            .iter()
            .filter(|&&(l, infinite)| {
                (p == 0 && infinite)
                    || if inclusive {
                        l >= cutoff - tol
                    } else {
                        l > cutoff + tol
                    }
            })
            .count();
        betti.push(count);
        cutoffs.push(Some(cutoff));
    }

    Ok(Thresholded {
        profile: BettiProfile::new(betti),
        cutoffs,
    })
}
