//! Minimal-architecture estimates from thresholded persistent homology.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::LabeledPointCloud;
use crate::error::{Error, Result};
use crate::ph::{
    build_rips, compute_persistence, threshold_features_detailed, BettiProfile,
    PersistenceDiagram, Subsample, ThresholdPolicy,
};
use crate::sweep::SweepRecord;
use crate::synth::{recovery_scale, RECOVERY_REACH};

pub const DEFAULT_INTERCEPT: f64 = 2.0;

/// Slope fitted on a depth-1 calibration sweep of the synthetic suite.
pub const FITTED_C: f64 = 3.4761904761904763;

/// Functional form of the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhaseForm {
    /// `beta1 * c * beta0^(1/ell) + intercept`
    #[default]
    Product,
    /// `a0 * beta0 + a1 * beta1 + intercept`
    Affine { a0: f64, a1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimator {
    pub c: f64,
    pub intercept: f64,
    pub ell: usize,
    #[serde(default)]
    pub form: PhaseForm,
}

impl PhaseEstimator {
    pub fn new(c: f64, ell: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || ell == 0 {
            return Err(Error::InvalidInput(format!(
                "estimator needs C > 0 and depth >= 1, got C = {c}, depth {ell}"
            )));
        }
        Ok(Self {
            c,
            intercept: DEFAULT_INTERCEPT,
            ell,
            form: PhaseForm::Product,
        })
    }

    /// Same coefficients applied at another depth.
    pub fn at_depth(&self, ell: usize) -> Self {
        Self {
            ell: ell.max(1),
            ..*self
        }
    }

    pub fn raw(&self, beta0: usize, beta1: usize) -> f64 {
        match self.form {
            PhaseForm::Product => {
                beta1 as f64 * self.c * (beta0 as f64).powf(1.0 / self.ell as f64) + self.intercept
            }
            PhaseForm::Affine { a0, a1 } => a0 * beta0 as f64 + a1 * beta1 as f64 + self.intercept,
        }
    }

    /// `C * beta0^(1/ell)`, the lower bound on the phase width implied by β_0 alone.
    pub fn floor(&self, beta0: usize) -> f64 {
        self.c * (beta0 as f64).powf(1.0 / self.ell as f64)
    }
}

/// Ceiling of the estimate, at least 1.
pub fn estimate_h_phase(est: &PhaseEstimator, beta0: usize, beta1: usize) -> usize {
    let v = est.raw(beta0, beta1);
    // Guard against values like 10.000000000000002.
    let v = (v - 1e-9).ceil();
    if v.is_finite() && v >= 1.0 {
        v as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCell {
    pub beta0: usize,
    pub beta1: usize,
    pub m_star: usize,
    pub fitted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub estimator: PhaseEstimator,
    pub cells: Vec<FitCell>,
    pub low_confidence: bool,
    pub mean_abs_residual: f64,
    /// Homology cells in the records for which no architecture reached full expressivity.
    pub unresolved: Vec<(usize, usize)>,
}

/// Smallest h0 at depth `ell` whose decision region fully expressed the
/// data's homology in at least one trial, per homology cell.
pub fn minimal_expressive_widths(records: &[SweepRecord], ell: usize) -> (BTreeMap<(usize, usize), usize>, Vec<(usize, usize)>) {
    let mut best: BTreeMap<(usize, usize), Option<usize>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.ell == ell) {
        let cell = (r.target_b0, r.target_b1);
        let slot = best.entry(cell).or_insert(None);
        let full = matches!((r.e_h0, r.e_h1), (Some(a), Some(b)) if a >= 1.0 && b >= 1.0);
        if full {
            *slot = Some(slot.map_or(r.h0, |m| m.min(r.h0)));
        }
    }
    let mut found = BTreeMap::new();
    let mut missing = Vec::new();
    for (cell, m) in best {
        match m {
            Some(m) => {
                found.insert(cell, m);
            }
            None => missing.push(cell),
        }
    }
    (found, missing)
}

/// Least-squares fit of the minimal expressive widths. With `affine` the fit
/// uses separate β_0 and β_1 coefficients; otherwise the single feature
/// β_1 · β_0^(1/ℓ). Both keep the intercept fixed at 2.
pub fn fit_phase_model(records: &[SweepRecord], ell: usize, affine: bool) -> Result<PhaseFit> {
    if ell == 0 {
        return Err(Error::InvalidInput("depth must be >= 1".into()));
    }
    let (m_star, unresolved) = minimal_expressive_widths(records, ell);
    if m_star.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no homology cell at depth {ell} has a fully expressive architecture"
        )));
    }
    let b = DEFAULT_INTERCEPT;
    let estimator = if affine {
        // normal equations for [beta0, beta1]
        let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&(b0, b1), &m) in &m_star {
            let (x0, x1, y) = (b0 as f64, b1 as f64, m as f64 - b);
            s00 += x0 * x0;
            s01 += x0 * x1;
            s11 += x1 * x1;
            t0 += x0 * y;
            t1 += x1 * y;
        }
        let det = s00 * s11 - s01 * s01;
        let (a0, a1) = if det.abs() > 1e-12 {
            ((t0 * s11 - t1 * s01) / det, (s00 * t1 - s01 * t0) / det)
        } else {
            (t0 / s00.max(f64::EPSILON), 0.0)
        };
        let c = if a1 > 0.0 { a1 } else { 1.0 };
        PhaseEstimator {
            c,
            intercept: b,
            ell,
            form: PhaseForm::Affine { a0, a1 },
        }
    } else {
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (&(b0, b1), &m) in &m_star {
            let x = b1 as f64 * (b0 as f64).powf(1.0 / ell as f64);
            sxx += x * x;
            sxy += x * (m as f64 - b);
        }
        if sxx == 0.0 {
            return Err(Error::InsufficientData(
                "every resolved cell has beta1 = 0, so C is unconstrained".into(),
            ));
        }
        let c = sxy / sxx;
        if !(c > 0.0) {
            return Err(Error::InsufficientData(format!(
                "fitted C = {c} is not positive"
            )));
        }
        PhaseEstimator {
            c,
            intercept: b,
            ell,
            form: PhaseForm::Product,
        }
    };
    let cells: Vec<FitCell> = m_star
        .iter()
        .map(|(&(b0, b1), &m)| {
            let fitted = estimator.raw(b0, b1);
            FitCell {
                beta0: b0,
                beta1: b1,
                m_star: m,
                fitted,
                residual: m as f64 - fitted,
            }
        })
        .collect();
    let informative = cells.iter().filter(|c| c.beta1 > 0).count();
    let mean_abs_residual = cells.iter().map(|c| c.residual.abs()).sum::<f64>() / cells.len() as f64;
    Ok(PhaseFit {
        estimator,
        low_confidence: informative < 2,
        mean_abs_residual,
        cells,
        unresolved,
    })
}

/// How the per-class profiles become one profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClassCombine {
    /// Dimension-wise maximum over both classes.
    #[default]
    Max,
    /// The label-1 class only.
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectOptions {
    pub eps_max: f64,
    pub policy: ThresholdPolicy,
    pub combine: ClassCombine,
    /// Point reduction applied to each class; `None` uses a lattice at
    /// `eps_max / 3`.
    pub subsample: Option<Subsample>,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            eps_max: 0.375,
            policy: ThresholdPolicy::TwoSigma,
            combine: ClassCombine::Max,
            subsample: None,
        }
    }
}

impl SelectOptions {
    pub fn effective_subsample(&self) -> Subsample {
        self.subsample.unwrap_or(Subsample::Lattice {
            pitch: recovery_scale(self.eps_max),
            reach: RECOVERY_REACH,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHomology {
    pub label: u8,
    pub n_points: usize,
    pub n_used: usize,
    pub profile: BettiProfile,
    pub cutoffs: Vec<Option<f64>>,
    pub diagram: PersistenceDiagram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub estimator: usize,
    pub ell: usize,
    pub h_phase: usize,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub options: SelectOptions,
    pub classes: Vec<ClassHomology>,
    pub profile: BettiProfile,
    pub estimators: Vec<PhaseEstimator>,
    pub recommendations: Vec<Recommendation>,
    pub warnings: Vec<String>,
    /// Paths of saved inputs, filled in by callers that write them.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

pub const RECOMMENDATION_DEPTHS: std::ops::RangeInclusive<usize> = 1..=4;

/// Persistence per class, thresholded, combined by dimension-wise maximum,
/// then turned into phase-width recommendations for depths 1 to 4.
pub fn select(
    cloud: &LabeledPointCloud,
    options: &SelectOptions,
    estimators: &[PhaseEstimator],
) -> Result<SelectionReport> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("empty point cloud".into()));
    }
    if estimators.is_empty() {
        return Err(Error::InvalidInput("at least one estimator is required".into()));
    }
    options.policy.validate()?;
    let subsample = options.effective_subsample();
    let mut classes = Vec::new();
    let mut warnings = Vec::new();
    for label in [0u8, 1] {
        let idx = cloud.class_indices(label);
        if idx.is_empty() {
            warnings.push(format!("class {label} has no points"));
            continue;
        }
        let pts = cloud.points.select(&idx)?;
        let used = subsample.apply(&pts)?;
        let diagram = compute_persistence(&build_rips(&used, options.eps_max, 2)?)?;
        let t = threshold_features_detailed(&diagram, options.policy)?;
        let finite_total = diagram.pairs().filter(|p| !p.is_infinite()).count();
        let essential = diagram.pairs_in_dim(0).filter(|p| p.is_infinite()).count();
        let kept: usize = t.profile.betti.iter().sum();
        if finite_total > 0 && kept <= essential {
            warnings.push(format!(
                "class {label}: thresholding discarded every finite feature"
            ));
        }
        classes.push(ClassHomology {
            label,
            n_points: idx.len(),
            n_used: used.len(),
            profile: t.profile,
            cutoffs: t.cutoffs,
            diagram,
        });
    }
    let profile = classes
        .iter()
        .filter(|c| options.combine == ClassCombine::Max || c.label == 1)
        .fold(BettiProfile::b0b1(0, 0), |acc, c| acc.max_with(&c.profile));
    let (b0, b1) = (profile.b0().max(1), profile.b1());
    let mut recommendations = Vec::new();
    for (i, est) in estimators.iter().enumerate() {
        for ell in RECOMMENDATION_DEPTHS {
            let e = est.at_depth(ell);
            recommendations.push(Recommendation {
                estimator: i,
                ell,
                h_phase: estimate_h_phase(&e, b0, b1),
                floor: e.floor(b0),
            });
        }
    }
    Ok(SelectionReport {
        options: *options,
        classes,
        profile,
        estimators: estimators.to_vec(),
        recommendations,
        warnings,
        provenance: BTreeMap::new(),
    })
}

impl SelectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "policy: {}  eps_max: {}  combine: {:?}",
            self.options.policy, self.options.eps_max, self.options.combine
        );
        for c in &self.classes {
            let cut: Vec<String> = c
                .cutoffs
                .iter()
                .map(|x| x.map_or("-".into(), |v| format!("{v:.4}")))
                .collect();
            let _ = writeln!(
                s,
                "class {}: {} points ({} used), betti {}, cutoffs [{}]",
                c.label,
                c.n_points,
                c.n_used,
                c.profile,
                cut.join(", ")
            );
        }
        let _ = writeln!(s, "combined betti: {}", self.profile);
        for r in &self.recommendations {
            let e = &self.estimators[r.estimator];
            let _ = writeln!(
                s,
                "depth {}: h_phase >= {} (floor {:.3}, C = {:.4})",
                r.ell, r.h_phase, r.floor, e.c
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for (k, v) in &self.provenance {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }
}
