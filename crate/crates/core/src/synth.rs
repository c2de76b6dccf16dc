//! Labeled 2-D datasets with known homology, built from disks and annuli.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledPointCloud;
use crate::error::{Error, Result};
use crate::ph::{
    compute_persistence, build_rips, threshold_features, BettiProfile, PointCloud, Subsample,
    ThresholdPolicy,
};

/// Annulus thickness as a fraction of its outer radius.
pub const DEFAULT_THICKNESS_RATIO: f64 = 0.25;
/// Default margin as a fraction of the smallest radius in a spec.
pub const DEFAULT_MARGIN_RATIO: f64 = 0.5;
pub const MAX_SUITE_BETA: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Disk,
    Annulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub center: [f64; 2],
    pub outer_radius: f64,
    #[serde(default)]
    pub inner_radius: f64,
}

impl ShapeSpec {
    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        Self {
            kind: ShapeKind::Disk,
            center,
            outer_radius: radius,
            inner_radius: 0.0,
        }
    }

    pub fn annulus(center: [f64; 2], outer_radius: f64, inner_radius: f64) -> Self {
        Self {
            kind: ShapeKind::Annulus,
            center,
            outer_radius,
            inner_radius,
        }
    }

    /// Annulus with the default thickness.
    pub fn ring(center: [f64; 2], outer_radius: f64) -> Self {
        Self::annulus(
            center,
            outer_radius,
            outer_radius * (1.0 - DEFAULT_THICKNESS_RATIO),
        )
    }

    /// (β_0, β_1) contribution.
    pub fn homology(&self) -> (usize, usize) {
        match self.kind {
            ShapeKind::Disk => (1, 0),
            ShapeKind::Annulus => (1, 1),
        }
    }

    pub fn area(&self) -> f64 {
        let r_in = match self.kind {
            ShapeKind::Disk => 0.0,
            ShapeKind::Annulus => self.inner_radius,
        };
        std::f64::consts::PI * (self.outer_radius.powi(2) - r_in.powi(2))
    }

    /// Euclidean distance from `p` to the shape (0 inside).
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let r = ((p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)).sqrt();
        if r > self.outer_radius {
            r - self.outer_radius
        } else if self.kind == ShapeKind::Annulus && r < self.inner_radius {
            self.inner_radius - r
        } else {
            0.0
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.distance(p) == 0.0
    }

    fn validate(&self) -> Result<()> {
        let ok_center = self.center.iter().all(|c| c.is_finite());
        if !ok_center || !(self.outer_radius > 0.0) || !self.outer_radius.is_finite() {
            return Err(Error::InfeasibleSpec(format!("bad shape geometry {self:?}")));
        }
        if self.kind == ShapeKind::Annulus
            && !(self.inner_radius >= 0.0 && self.inner_radius < self.outer_radius)
        {
            return Err(Error::InfeasibleSpec(format!(
                "annulus needs 0 <= inner < outer radius, got {self:?}"
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let u: f64 = rng.random();
        let r = match self.kind {
            ShapeKind::Disk => self.outer_radius * u.sqrt(),
            ShapeKind::Annulus => {
                let (a, b) = (self.inner_radius.powi(2), self.outer_radius.powi(2));
                (a + u * (b - a)).sqrt()
            }
        };
        [
            self.center[0] + r * theta.cos(),
            self.center[1] + r * theta.sin(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub shapes: Vec<ShapeSpec>,
    pub n_points: usize,
    pub margin: f64,
    /// Lower-left and upper-right corners.
    pub bounding_box: [[f64; 2]; 2],
    pub seed: u64,
    #[serde(default = "default_attempt_factor")]
    pub max_attempt_factor: u64,
}

fn default_attempt_factor() -> u64 {
    1000
}

impl DatasetSpec {
    pub fn target_homology(&self) -> BettiProfile {
        let (b0, b1) = self
            .shapes
            .iter()
            .map(ShapeSpec::homology)
            .fold((0, 0), |a, h| (a.0 + h.0, a.1 + h.1));
        BettiProfile::b0b1(b0, b1)
    }

    /// Default margin for a shape list: half the smallest radius present.
    pub fn default_margin(shapes: &[ShapeSpec]) -> f64 {
        shapes
            .iter()
            .flat_map(|s| match s.kind {
                ShapeKind::Disk => vec![s.outer_radius],
                ShapeKind::Annulus => vec![s.outer_radius, s.inner_radius],
            })
            .filter(|r| *r > 0.0)
            .fold(f64::INFINITY, f64::min)
            * DEFAULT_MARGIN_RATIO
    }

    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::InfeasibleSpec("no shapes".into()));
        }
        for s in &self.shapes {
            s.validate()?;
        }
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(Error::InfeasibleSpec(format!("bad margin {}", self.margin)));
        }
        let [lo, hi] = self.bounding_box;
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::InfeasibleSpec(format!(
                "degenerate bounding box {:?}",
                self.bounding_box
            )));
        }
        if self.n_points < 2 * self.shapes.len() {
            return Err(Error::InfeasibleSpec(format!(
                "{} points cannot cover {} shapes and their complement",
                self.n_points,
                self.shapes.len()
            )));
        }
        let m = self.margin;
        for (i, s) in self.shapes.iter().enumerate() {
            let reach = s.outer_radius + m;
            let inside = (0..2)
                .all(|k| s.center[k] - reach >= lo[k] && s.center[k] + reach <= hi[k]);
            if !inside {
                return Err(Error::InfeasibleSpec(format!(
                    "shape {i} inflated by the margin leaves the bounding box"
                )));
            }
            for (j, t) in self.shapes.iter().enumerate().skip(i + 1) {
                let d = ((s.center[0] - t.center[0]).powi(2) + (s.center[1] - t.center[1]).powi(2))
                    .sqrt();
                let nested = s.kind == ShapeKind::Annulus
                    && d + t.outer_radius + 2.0 * m <= s.inner_radius
                    || t.kind == ShapeKind::Annulus && d + s.outer_radius + 2.0 * m <= t.inner_radius;
                if d < s.outer_radius + t.outer_radius + 2.0 * m && !nested {
                    return Err(Error::InfeasibleSpec(format!(
                        "shapes {i} and {j} overlap once inflated by the margin"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when `p` is a legal negative: in the box and at least `margin` from every shape.
    pub fn is_negative_region(&self, p: [f64; 2]) -> bool {
        let [lo, hi] = self.bounding_box;
        (0..2).all(|k| p[k] >= lo[k] && p[k] <= hi[k])
            && self.shapes.iter().all(|s| s.distance(p) >= self.margin)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Samples positives uniformly inside the shapes (equal counts per shape,
/// differing by at most one) and an equal number of negatives uniformly from
/// the box minus the margin-inflated shapes.
pub fn sample_dataset(spec: &DatasetSpec) -> Result<LabeledPointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_pos = spec.n_points / 2;
    let n_neg = spec.n_points - n_pos;
    let k = spec.shapes.len();

    let mut coords = Vec::with_capacity(spec.n_points * 2);
    let mut labels = Vec::with_capacity(spec.n_points);
    for (i, shape) in spec.shapes.iter().enumerate() {
        let count = n_pos / k + usize::from(i < n_pos % k);
        for _ in 0..count {
            coords.extend_from_slice(&shape.sample(&mut rng));
            labels.push(1);
        }
    }

    let [lo, hi] = spec.bounding_box;
    let cap = spec.max_attempt_factor.max(1) * n_neg as u64;
    let mut attempts = 0u64;
    let mut accepted = 0usize;
    while accepted < n_neg {
        if attempts >= cap {
            return Err(Error::RejectionStall {
                attempts,
                accepted,
                wanted: n_neg,
            });
        }
        attempts += 1;
        let p = [
            rng.random_range(lo[0]..=hi[0]),
            rng.random_range(lo[1]..=hi[1]),
        ];
        if spec.is_negative_region(p) {
            coords.extend_from_slice(&p);
            labels.push(0);
            accepted += 1;
        }
    }

    let cloud = LabeledPointCloud::new(PointCloud::from_flat(2, coords)?, labels)?;
    Ok(cloud.with_ground_truth(spec.target_homology()))
}

/// Geometry of generated suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteLayout {
    pub radius: f64,
    pub thickness_ratio: f64,
    /// Margin; `None` means half the smallest radius in each spec.
    pub margin: Option<f64>,
    /// Extra room per grid cell within which centers are jittered.
    pub jitter: f64,
    pub n_points: usize,
    /// Largest allowed side of the bounding box.
    pub max_extent: Option<f64>,
}

impl Default for SuiteLayout {
    fn default() -> Self {
        Self {
            radius: 1.0,
            thickness_ratio: DEFAULT_THICKNESS_RATIO,
            margin: None,
            jitter: 0.5,
            n_points: 5000,
            max_extent: None,
        }
    }
}

/// One spec per (b0, b1) with b1 <= b0, b0 in 1..=beta0_max, b1 in 0..=beta1_max.
pub fn make_homology_suite(beta0_max: usize, beta1_max: usize, seed: u64) -> Result<Vec<DatasetSpec>> {
    make_homology_suite_with(beta0_max, beta1_max, seed, &SuiteLayout::default())
}

pub fn make_homology_suite_with(
    beta0_max: usize,
    beta1_max: usize,
    seed: u64,
    layout: &SuiteLayout,
) -> Result<Vec<DatasetSpec>> {
    if !(1..=MAX_SUITE_BETA).contains(&beta0_max) {
        return Err(Error::InvalidInput(format!(
            "beta0_max must lie in 1..={MAX_SUITE_BETA}, got {beta0_max}"
        )));
    }
    if beta1_max > beta0_max {
        return Err(Error::InvalidInput(format!(
            "beta1_max ({beta1_max}) cannot exceed beta0_max ({beta0_max}): every annulus is also a component"
        )));
    }
    let mut out = Vec::new();
    for b0 in 1..=beta0_max {
        for b1 in 0..=beta1_max.min(b0) {
            out.push(homology_spec(b0, b1, cell_seed(seed, b0, b1), layout)?);
        }
    }
    Ok(out)
}

/// A single grid-laid spec with `b1` annuli followed by `b0 - b1` disks.
pub fn homology_spec(b0: usize, b1: usize, seed: u64, layout: &SuiteLayout) -> Result<DatasetSpec> {
    if b0 == 0 || b1 > b0 {
        return Err(Error::InvalidInput(format!(
            "cannot realise homology ({b0}, {b1}) with disks and annuli"
        )));
    }
    let r = layout.radius;
    let inner = r * (1.0 - layout.thickness_ratio);
    let margin = layout.margin.unwrap_or_else(|| {
        if b1 > 0 {
            inner.min(r) * DEFAULT_MARGIN_RATIO
        } else {
            r * DEFAULT_MARGIN_RATIO
        }
    });
    let cols = (b0 as f64).sqrt().ceil() as usize;
    let rows = b0.div_ceil(cols);
    let pitch = 2.0 * (r + margin) + layout.jitter;
    let (width, height) = (cols as f64 * pitch, rows as f64 * pitch);
    if let Some(max) = layout.max_extent {
        if width > max || height > max {
            return Err(Error::LayoutOverflow(format!(
                "{b0} shapes need a {width:.3} x {height:.3} box, limit is {max}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let half_jitter = layout.jitter / 2.0;
    let shapes = (0..b0)
        .map(|i| {
            let (cx, cy) = ((i % cols) as f64, (i / cols) as f64);
            let mut c = [
                -width / 2.0 + (cx + 0.5) * pitch,
                height / 2.0 - (cy + 0.5) * pitch,
            ];
            if half_jitter > 0.0 {
                c[0] += rng.random_range(-half_jitter..=half_jitter);
                c[1] += rng.random_range(-half_jitter..=half_jitter);
            }
            if i < b1 {
                ShapeSpec::annulus(c, r, inner)
            } else {
                ShapeSpec::disk(c, r)
            }
        })
        .collect();
    let spec = DatasetSpec {
        shapes,
        n_points: layout.n_points,
        margin,
        bounding_box: [[-width / 2.0, -height / 2.0], [width / 2.0, height / 2.0]],
        seed,
        max_attempt_factor: default_attempt_factor(),
    };
    spec.validate()?;
    Ok(spec)
}

/// Dataset seed of one suite cell.
pub fn cell_seed(seed: u64, b0: usize, b1: usize) -> u64 {
    seed.wrapping_mul(0x100_0000_01b3)
        .wrapping_add((b0 as u64) << 32 | b1 as u64)
}

/// Parameters for recovering homology from the positive class of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryParams {
    pub eps_max: f64,
    pub subsample: Subsample,
    pub policy: ThresholdPolicy,
}

/// Lattice reach, in units of the pitch, used by default recovery.
pub const RECOVERY_REACH: f64 = 1.5;

impl RecoveryParams {
    /// Lattice landmarks at the recovery scale `eps_max / 3`, two-sigma thresholding.
    pub fn new(eps_max: f64) -> Self {
        Self {
            eps_max,
            subsample: Subsample::Lattice {
                pitch: recovery_scale(eps_max),
                reach: RECOVERY_REACH,
            },
            policy: ThresholdPolicy::TwoSigma,
        }
    }
}

/// Lattice pitch used when recovering homology with the given `eps_max`.
/// Shapes separated by less than three times this scale may merge.
pub fn recovery_scale(eps_max: f64) -> f64 {
    eps_max / 3.0
}

/// Persistent homology of the positive points, thresholded with the two-sigma rule.
pub fn verify_ground_truth(cloud: &LabeledPointCloud, eps_max: f64) -> Result<BettiProfile> {
    verify_ground_truth_with(cloud, &RecoveryParams::new(eps_max))
}

pub fn verify_ground_truth_with(
    cloud: &LabeledPointCloud,
    params: &RecoveryParams,
) -> Result<BettiProfile> {
    if cloud.ground_truth.is_none() {
        return Err(Error::InvalidInput(
            "cloud carries no ground-truth homology".into(),
        ));
    }
    let positives = params.subsample.apply(&cloud.class_points(1)?)?;
    let diagram = compute_persistence(&build_rips(&positives, params.eps_max, 2)?)?;
    threshold_features(&diagram, params.policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1_spec(seed: u64) -> DatasetSpec {
        let shapes = vec![ShapeSpec::disk([-2.0, 0.0], 1.0), ShapeSpec::disk([2.0, 0.0], 1.0)];
        DatasetSpec {
            margin: DatasetSpec::default_margin(&shapes),
            shapes,
            n_points: 5000,
            bounding_box: [[-4.0, -2.0], [4.0, 2.0]],
            seed,
            max_attempt_factor: 1000,
        }
    }

    #[test]
    fn d1_ground_truth() {
        let c = sample_dataset(&d1_spec(1)).unwrap();
        assert_eq!(c.ground_truth, Some(BettiProfile::b0b1(2, 0)));
        assert_eq!(c.len(), 5000);
        assert_eq!(c.class_indices(1).len(), 2500);
    }

    #[test]
    fn empty_shape_list_is_infeasible() {
        let mut s = d1_spec(0);
        s.shapes.clear();
        assert!(matches!(sample_dataset(&s), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn overlapping_or_escaping_shapes_are_infeasible() {
        let mut s = d1_spec(0);
        s.shapes[1].center = [0.5, 0.0];
        assert!(matches!(s.validate(), Err(Error::InfeasibleSpec(_))));
        let mut s = d1_spec(0);
        s.bounding_box = [[-3.0, -1.0], [3.0, 1.0]];
        assert!(matches!(s.validate(), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn rejection_stall_is_reported() {
        let mut s = d1_spec(0);
        s.max_attempt_factor = 1;
        s.bounding_box = [[-3.51, -1.51], [3.51, 1.51]];
        assert!(matches!(
            sample_dataset(&s),
            Err(Error::RejectionStall { .. })
        ));
    }

    #[test]
    fn labels_respect_geometry() {
        let spec = d1_spec(3);
        let c = sample_dataset(&spec).unwrap();
        for (p, &l) in c.points.points().zip(&c.labels) {
            let p = [p[0], p[1]];
            if l == 1 {
                assert!(spec.shapes.iter().any(|s| s.contains(p)));
            } else {
                assert!(spec.shapes.iter().all(|s| s.distance(p) >= spec.margin));
            }
        }
    }

    #[test]
    fn per_shape_counts_balanced() {
        let mut spec = homology_spec(3, 1, 5, &SuiteLayout::default()).unwrap();
        spec.n_points = 1001;
        let c = sample_dataset(&spec).unwrap();
        let counts: Vec<usize> = spec
            .shapes
            .iter()
            .map(|s| {
                c.class_points(1)
                    .unwrap()
                    .points()
                    .filter(|p| s.contains([p[0], p[1]]))
                    .count()
            })
            .collect();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
        assert_eq!(counts.iter().sum::<usize>(), 500);
    }

    #[test]
    fn suite_shapes() {
        let suite = make_homology_suite(2, 1, 9).unwrap();
        let got: Vec<_> = suite.iter().map(|s| s.target_homology()).collect();
        assert_eq!(
            got,
            vec![
                BettiProfile::b0b1(1, 0),
                BettiProfile::b0b1(1, 1),
                BettiProfile::b0b1(2, 0),
                BettiProfile::b0b1(2, 1)
            ]
        );
        assert_eq!(suite[0].shapes.len(), 1);
        let kinds: Vec<_> = suite[3].shapes.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![ShapeKind::Annulus, ShapeKind::Disk]);
    }

    #[test]
    fn largest_suite_cell() {
        let spec = homology_spec(30, 30, 1, &SuiteLayout::default()).unwrap();
        assert_eq!(spec.target_homology(), BettiProfile::b0b1(30, 30));
        assert!(spec.shapes.iter().all(|s| s.kind == ShapeKind::Annulus));
    }

    #[test]
    fn suite_preconditions() {
        assert!(make_homology_suite(0, 0, 1).is_err());
        assert!(make_homology_suite(31, 0, 1).is_err());
        assert!(make_homology_suite(2, 3, 1).is_err());
        let tight = SuiteLayout {
            max_extent: Some(5.0),
            ..SuiteLayout::default()
        };
        assert!(matches!(
            make_homology_suite_with(9, 0, 1, &tight),
            Err(Error::LayoutOverflow(_))
        ));
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = homology_spec(4, 2, 11, &SuiteLayout::default()).unwrap();
        let text = spec.to_toml().unwrap();
        assert_eq!(DatasetSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn recovers_d1_and_d2() {
        let c = sample_dataset(&d1_spec(7)).unwrap();
        assert_eq!(verify_ground_truth(&c, 0.375).unwrap(), BettiProfile::b0b1(2, 0));
        let spec = homology_spec(4, 2, 7, &SuiteLayout::default()).unwrap();
        let c = sample_dataset(&spec).unwrap();
        assert_eq!(verify_ground_truth(&c, 0.375).unwrap(), BettiProfile::b0b1(4, 2));
    }

    #[test]
    fn verify_needs_ground_truth() {
        let mut c = sample_dataset(&d1_spec(7)).unwrap();
        c.ground_truth = None;
        assert!(verify_ground_truth(&c, 0.375).is_err());
    }

    #[test]
    fn deterministic_sampling() {
        let spec = d1_spec(42);
        assert_eq!(sample_dataset(&spec).unwrap(), sample_dataset(&spec).unwrap());
    }
}
