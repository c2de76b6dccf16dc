//! Architecture x dataset x trial experiment grids.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledPointCloud;
use crate::error::Result;
use crate::mlp::{init_model, train, Architecture, TrainConfig, TrainResult};
use crate::ph::BettiProfile;
use crate::region::{expressivity, homology_match, mask_betti, rasterize, DEFAULT_RESOLUTION};
use crate::synth::{sample_dataset, DatasetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    /// Replace each architecture's trunk width by β_0 of the dataset.
    pub trunk_from_data: bool,
    /// Raster resolution for decision-region homology; 0 skips it.
    pub resolution: usize,
    /// Size of a fresh sample used to re-measure the final model's error; 0 skips it.
    pub fresh_samples: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            trunk_from_data: true,
            resolution: DEFAULT_RESOLUTION,
            fresh_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub ell: usize,
    pub h0: usize,
    pub trunk_width: usize,
    pub spec_index: usize,
    pub target_b0: usize,
    pub target_b1: usize,
    pub trial: usize,
    pub seed: u64,
    pub best_error: Option<f64>,
    pub final_error: Option<f64>,
    pub converged_at: Option<usize>,
    pub steps: Option<usize>,
    pub f_b0: Option<usize>,
    pub f_b1: Option<usize>,
    pub e_h0: Option<f64>,
    pub e_h1: Option<f64>,
    pub homology_match: Option<bool>,
    pub fresh_error: Option<f64>,
    pub failure: Option<String>,
}

impl SweepRecord {
    pub fn arch(&self) -> Architecture {
        Architecture {
            ell: self.ell,
            h0: self.h0,
            trunk_width: self.trunk_width,
        }
    }

    pub fn target(&self) -> BettiProfile {
        BettiProfile::b0b1(self.target_b0, self.target_b1)
    }

    pub fn f_profile(&self) -> Option<BettiProfile> {
        Some(BettiProfile::b0b1(self.f_b0?, self.f_b1?))
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one (architecture, dataset, trial) cell.
pub fn trial_seed(base: u64, arch: &Architecture, spec_seed: u64, trial: usize) -> u64 {
    [arch.ell as u64, arch.h0 as u64, spec_seed, trial as u64]
        .iter()
        .fold(splitmix64(base), |acc, &v| splitmix64(acc ^ v))
}

/// Trains one model and measures its decision region on the spec's domain.
pub fn run_trial(
    arch: Architecture,
    spec: &DatasetSpec,
    spec_index: usize,
    data: &LabeledPointCloud,
    fresh: Option<&LabeledPointCloud>,
    trial: usize,
    config: &TrainConfig,
    options: &SweepOptions,
) -> (SweepRecord, Option<TrainResult>) {
    let target = spec.target_homology();
    let arch = if options.trunk_from_data {
        Architecture {
            trunk_width: target.b0().max(1),
            ..arch
        }
    } else {
        arch
    };
    let seed = trial_seed(config.seed, &arch, spec.seed, trial);
    let mut rec = SweepRecord {
        ell: arch.ell,
        h0: arch.h0,
        trunk_width: arch.trunk_width,
        spec_index,
        target_b0: target.b0(),
        target_b1: target.b1(),
        trial,
        seed,
        best_error: None,
        final_error: None,
        converged_at: None,
        steps: None,
        f_b0: None,
        f_b1: None,
        e_h0: None,
        e_h1: None,
        homology_match: None,
        fresh_error: None,
        failure: None,
    };
    let outcome = (|| -> Result<TrainResult> {
        let model = init_model(arch, data.dim(), target.b0().max(1), seed)?;
        let cfg = TrainConfig { seed, ..*config };
        let result = train(model, data, &cfg)?;
        let model = &result.final_model;
        if options.resolution > 0 {
            let mask = rasterize(model, spec.bounding_box, options.resolution)?;
            let f = mask_betti(&mask);
            let e = expressivity(&f, &target);
            rec.f_b0 = Some(f.b0());
            rec.f_b1 = Some(f.b1());
            rec.e_h0 = Some(e.e0());
            rec.e_h1 = Some(e.e1());
            rec.homology_match = Some(homology_match(&f, &target));
        }
        if let Some(fresh) = fresh {
            rec.fresh_error = Some(model.error_rate(&fresh.points, &fresh.labels, None)?);
        }
        Ok(result)
    })();
    match outcome {
        Ok(r) => {
            rec.best_error = Some(r.best_error);
            rec.final_error = Some(r.final_error());
            rec.converged_at = r.converged_at;
            rec.steps = Some(r.steps);
            (rec, Some(r))
        }
        Err(e) => {
            rec.failure = Some(e.to_string());
            (rec, None)
        }
    }
}

/// One evaluation of a trial's held-out error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub ell: usize,
    pub h0: usize,
    pub spec_index: usize,
    pub trial: usize,
    pub step: usize,
    pub error: f64,
}

/// Every (architecture, spec, trial) cell, in that nesting order. Cells run
/// in parallel; the output order does not depend on scheduling. Failed
/// cells are recorded rather than aborting the sweep.
pub fn sweep(
    archs: &[Architecture],
    specs: &[DatasetSpec],
    trials: usize,
    config: &TrainConfig,
    options: &SweepOptions,
) -> Result<Vec<SweepRecord>> {
    sweep_with_curves(archs, specs, trials, config, options).map(|(r, _)| r)
}

/// Like [`sweep`], also returning every trial's error curve.
pub fn sweep_with_curves(
    archs: &[Architecture],
    specs: &[DatasetSpec],
    trials: usize,
    config: &TrainConfig,
    options: &SweepOptions,
) -> Result<(Vec<SweepRecord>, Vec<CurvePoint>)> {
    if trials == 0 {
        return Err(crate::Error::InvalidInput("trials must be >= 1".into()));
    }
    config.validate()?;
    for a in archs {
        a.validate()?;
    }
    if archs.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let datasets: Vec<LabeledPointCloud> = specs.iter().map(sample_dataset).collect::<Result<_>>()?;
    let fresh: Vec<Option<LabeledPointCloud>> = specs
        .iter()
        .map(|s| fresh_sample(s, options.fresh_samples))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize, usize)> = (0..archs.len())
        .flat_map(|a| (0..specs.len()).flat_map(move |s| (0..trials).map(move |t| (a, s, t))))
        .collect();
    let results: Vec<(SweepRecord, Vec<CurvePoint>)> = cells
        .into_par_iter()
        .map(|(a, s, t)| {
            let (rec, result) = run_trial(archs[a], &specs[s], s, &datasets[s], fresh[s].as_ref(), t, config, options);
            let curve = result
                .map(|r| {
                    r.error_curve
                        .iter()
                        .map(|&(step, error)| CurvePoint {
                            ell: rec.ell,
                            h0: rec.h0,
                            spec_index: s,
                            trial: t,
                            step,
                            error,
                        })
                        .collect()
                })
                .unwrap_or_default();
            (rec, curve)
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut curves = Vec::new();
    for (r, c) in results {
        records.push(r);
        curves.extend(c);
    }
    Ok((records, curves))
}

/// An independent sample of `n` points from the same distribution as `spec`.
pub fn fresh_sample(spec: &DatasetSpec, n: usize) -> Result<Option<LabeledPointCloud>> {
    if n == 0 {
        return Ok(None);
    }
    let fresh = DatasetSpec {
        n_points: n,
        seed: splitmix64(spec.seed ^ 0xf4e5_d6c7_b8a9_0123),
        ..spec.clone()
    };
    sample_dataset(&fresh).map(Some)
}

/// Lowest error per architecture over every dataset and trial.
pub fn best_error_by_arch(records: &[SweepRecord]) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for r in records {
        if let Some(e) = r.best_error {
            let v = out.entry((r.ell, r.h0)).or_insert(f64::INFINITY);
            *v = f64::min(*v, e);
        }
    }
    out
}

/// Lowest error per (architecture, dataset) over trials.
pub fn best_error_by_arch_and_spec(records: &[SweepRecord]) -> BTreeMap<(usize, usize, usize), f64> {
    let mut out = BTreeMap::new();
    for r in records {
        if let Some(e) = r.best_error {
            let v = out.entry((r.ell, r.h0, r.spec_index)).or_insert(f64::INFINITY);
            *v = f64::min(*v, e);
        }
    }
    out
}

/// Mean convergence step per (architecture, dataset) over the trials that
/// converged, with the number of such trials.
pub fn mean_convergence(records: &[SweepRecord]) -> BTreeMap<(usize, usize, usize), (f64, usize)> {
    let mut acc: BTreeMap<(usize, usize, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        if let Some(c) = r.converged_at {
            let e = acc.entry((r.ell, r.h0, r.spec_index)).or_default();
            e.0 += c as f64;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, (sum / n as f64, n)))
        .collect()
}

/// Fraction of trials with a measured β_0(f) ≥ k, keyed by (ell, h0) and
/// indexed by k = 1..=k_max.
pub fn expressivity_frequencies(records: &[SweepRecord], k_max: usize) -> BTreeMap<(usize, usize), Vec<f64>> {
    let mut acc: BTreeMap<(usize, usize), (Vec<usize>, usize)> = BTreeMap::new();
    for r in records {
        let Some(b0) = r.f_b0 else { continue };
        let e = acc
            .entry((r.ell, r.h0))
            .or_insert_with(|| (vec![0; k_max], 0));
        e.1 += 1;
        for k in 1..=k_max.min(b0) {
            e.0[k - 1] += 1;
        }
    }
    acc.into_iter()
        .map(|(key, (counts, n))| (key, counts.iter().map(|&c| c as f64 / n as f64).collect()))
        .collect()
}

pub fn write_records_csv<W: Write>(records: &[SweepRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn write_curves_csv<W: Write>(curves: &[CurvePoint], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for c in curves {
        wtr.serialize(c)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_curves_csv<R: std::io::Read>(r: R) -> Result<Vec<CurvePoint>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{homology_spec, SuiteLayout};

    fn small_spec() -> DatasetSpec {
        let layout = SuiteLayout {
            n_points: 400,
            ..SuiteLayout::default()
        };
        homology_spec(1, 0, 3, &layout).unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            max_steps: 60,
            eval_interval: 20,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn empty_arch_list() {
        let r = sweep(&[], &[small_spec()], 1, &quick(), &SweepOptions::default()).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let archs = [Architecture::new(1, 3, 1).unwrap(), Architecture::new(1, 5, 1).unwrap()];
        let opts = SweepOptions {
            resolution: 32,
            fresh_samples: 200,
            ..SweepOptions::default()
        };
        let a = sweep(&archs, &[small_spec()], 2, &quick(), &opts).unwrap();
        let b = sweep(&archs, &[small_spec()], 2, &quick(), &opts).unwrap();
        assert_eq!(a, b);
        let keys: Vec<_> = a.iter().map(|r| (r.h0, r.trial)).collect();
        assert_eq!(keys, vec![(3, 0), (3, 1), (5, 0), (5, 1)]);
        assert!(a.iter().all(|r| r.failure.is_none() && r.f_b0.is_some()));
        assert!(a.iter().all(|r| r.fresh_error.is_some()));
    }

    #[test]
    fn csv_round_trip() {
        let archs = [Architecture::new(1, 2, 1).unwrap()];
        let recs = sweep(&archs, &[small_spec()], 1, &quick(), &SweepOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        assert_eq!(read_records_csv(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn aggregations() {
        let mk = |h0, spec_index, best: f64, conv, b0| SweepRecord {
            ell: 1,
            h0,
            trunk_width: 1,
            spec_index,
            target_b0: 1,
            target_b1: 0,
            trial: 0,
            seed: 0,
            best_error: Some(best),
            final_error: Some(best),
            converged_at: conv,
            steps: Some(10),
            f_b0: Some(b0),
            f_b1: Some(0),
            e_h0: None,
            e_h1: None,
            homology_match: None,
            fresh_error: None,
            failure: None,
        };
        let recs = vec![
            mk(2, 0, 0.3, None, 1),
            mk(2, 1, 0.1, Some(40), 2),
            mk(2, 1, 0.2, Some(60), 0),
        ];
        assert_eq!(best_error_by_arch(&recs)[&(1, 2)], 0.1);
        assert_eq!(best_error_by_arch_and_spec(&recs)[&(1, 2, 0)], 0.3);
        assert_eq!(mean_convergence(&recs)[&(1, 2, 1)], (50.0, 2));
        let freq = &expressivity_frequencies(&recs, 3)[&(1, 2)];
        assert_eq!(freq, &vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
    }
}
