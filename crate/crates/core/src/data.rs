//! Labeled point clouds and their CSV form (`x1,...,xd,label` with a header).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ph::{BettiProfile, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    pub points: PointCloud,
    pub labels: Vec<u8>,
    pub ground_truth: Option<BettiProfile>,
}

impl LabeledPointCloud {
    pub fn new(points: PointCloud, labels: Vec<u8>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {l} is not 0 or 1")));
        }
        Ok(Self {
            points,
            labels,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(mut self, profile: BettiProfile) -> Self {
        self.ground_truth = Some(profile);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }

    pub fn class_indices(&self, label: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn class_points(&self, label: u8) -> Result<PointCloud> {
        let idx = self.class_indices(label);
        if idx.is_empty() {
            return Err(Error::InvalidInput(format!("no points with label {label}")));
        }
        self.points.select(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            points: self.points.select(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ground_truth: self.ground_truth.clone(),
        })
    }

    /// Axis-aligned bounding box as (min corner, max corner).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in self.points.points() {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("x{k}")).collect();
        header.push("label".into());
        wtr.write_record(&header)?;
        let mut row = Vec::with_capacity(self.dim() + 1);
        for (p, &l) in self.points.points().zip(&self.labels) {
            row.clear();
            row.extend(p.iter().map(|x| format!("{x:?}")));
            row.push(l.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || headers.get(headers.len() - 1) != Some("label") {
            return Err(Error::Parse(
                "expected a header row ending in a `label` column".into(),
            ));
        }
        let d = headers.len() - 1;
        let mut coords = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for k in 0..d {
                let v: f64 = rec[k].trim().parse().map_err(|_| {
                    Error::Parse(format!("row {}: bad coordinate {:?}", line + 2, &rec[k]))
                })?;
                coords.push(v);
            }
            let l: u8 = rec[d].trim().parse().map_err(|_| {
                Error::Parse(format!("row {}: bad label {:?}", line + 2, &rec[d]))
            })?;
            labels.push(l);
        }
        Self::new(PointCloud::from_flat(d, coords)?, labels)
    }

    /// Writes the CSV and, when ground truth is known, a `.meta.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        if let Some(gt) = &self.ground_truth {
            let meta = CloudMeta {
                ground_truth: Some(gt.clone()),
                n_points: self.len(),
                dim: self.dim(),
            };
            std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
        }
        Ok(())
    }

    /// Reads a CSV, picking up ground truth from a sidecar if one exists.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cloud = Self::read_csv(std::fs::File::open(path)?)?;
        let meta = sidecar_path(path);
        if meta.exists() {
            let m: CloudMeta = serde_json::from_str(&std::fs::read_to_string(meta)?)?;
            cloud.ground_truth = m.ground_truth;
        }
        Ok(cloud)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CloudMeta {
    pub ground_truth: Option<BettiProfile>,
    pub n_points: usize,
    pub dim: usize,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let pts = PointCloud::new(&[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 4.0]]).unwrap();
        let c = LabeledPointCloud::new(pts, vec![1, 0]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,label\n"));
        assert_eq!(LabeledPointCloud::read_csv(&buf[..]).unwrap(), c);
    }

    #[test]
    fn bad_rows_are_reported() {
        assert!(LabeledPointCloud::read_csv("x1,label\nfoo,1\n".as_bytes()).is_err());
        assert!(LabeledPointCloud::read_csv("x1,y\n1,1\n".as_bytes()).is_err());
        assert!(LabeledPointCloud::read_csv("x1,label\n1,3\n".as_bytes()).is_err());
    }

    #[test]
    fn sidecar_carries_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let pts = PointCloud::new(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let c = LabeledPointCloud::new(pts, vec![1, 0])
            .unwrap()
            .with_ground_truth(BettiProfile::b0b1(1, 0));
        c.save(&path).unwrap();
        assert!(sidecar_path(&path).exists());
        assert_eq!(LabeledPointCloud::load(&path).unwrap(), c);
    }
}
