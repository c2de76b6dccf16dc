use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ph::PointCloud;

pub const MAX_H0: usize = 500;
pub const MAX_REPLICATION_DEPTH: usize = 6;
const CHECKPOINT_MAGIC: &[u8; 8] = b"HCMLP\0\0\x01";

/// `ell` hidden layers: the first has width `h0`, the remaining `ell - 1`
/// have width `trunk_width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Architecture {
    pub ell: usize,
    pub h0: usize,
    pub trunk_width: usize,
}

impl Architecture {
    pub fn new(ell: usize, h0: usize, trunk_width: usize) -> Result<Self> {
        let a = Self {
            ell,
            h0,
            trunk_width,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 || self.h0 == 0 || self.trunk_width == 0 {
            return Err(Error::InvalidArchitecture(format!(
                "depth and widths must be >= 1, got {self}"
            )));
        }
        if self.h0 > MAX_H0 {
            return Err(Error::InvalidArchitecture(format!(
                "h0 = {} exceeds {MAX_H0}",
                self.h0
            )));
        }
        Ok(())
    }

    /// Additional limits of the replication grid.
    pub fn validate_replication(&self) -> Result<()> {
        self.validate()?;
        if self.ell > MAX_REPLICATION_DEPTH {
            return Err(Error::InvalidArchitecture(format!(
                "depth {} exceeds {MAX_REPLICATION_DEPTH}",
                self.ell
            )));
        }
        Ok(())
    }

    /// (inputs, outputs) of every affine layer, ending in the 2-logit head.
    pub fn layer_shapes(&self, input_dim: usize) -> Vec<(usize, usize)> {
        let mut widths = vec![input_dim, self.h0];
        widths.extend(std::iter::repeat_n(self.trunk_width, self.ell - 1));
        widths.push(2);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.ell, self.h0)
    }
}

/// Fully-connected ReLU network with a 2-logit output. All parameters live in
/// one flat vector; layer `l` stores its `inputs x outputs` weight matrix
/// row-major followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub arch: Architecture,
    pub input_dim: usize,
    shapes: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(arch: Architecture, input_dim: usize) -> Result<Self> {
        arch.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidArchitecture("input dimension must be >= 1".into()));
        }
        let shapes = arch.layer_shapes(input_dim);
        let mut offsets = Vec::with_capacity(shapes.len() + 1);
        let mut total = 0;
        for &(i, o) in &shapes {
            offsets.push(total);
            total += i * o + o;
        }
        offsets.push(total);
        Ok(Self {
            arch,
            input_dim,
            shapes,
            offsets,
            params: vec![0.0; total],
        })
    }

    pub fn num_layers(&self) -> usize {
        self.shapes.len()
    }

    pub fn layer_shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (i, o) = self.shapes[l];
        &self.params[self.offsets[l]..self.offsets[l] + i * o]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (i, o) = self.shapes[l];
        let s = self.offsets[l];
        &mut self.params[s..s + i * o]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (i, o) = self.shapes[l];
        let s = self.offsets[l] + i * o;
        &self.params[s..s + o]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let (i, o) = self.shapes[l];
        let s = self.offsets[l] + i * o;
        &mut self.params[s..s + o]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn max_width(&self) -> usize {
        self.shapes.iter().map(|s| s.0.max(s.1)).max().unwrap_or(0)
    }

    /// Logits for a single point, using caller-provided scratch buffers.
    fn logits_into(&self, x: &[f64], a: &mut Vec<f64>, z: &mut Vec<f64>) -> [f64; 2] {
        a.clear();
        a.extend_from_slice(x);
        let last = self.shapes.len() - 1;
        for (l, &(ni, _)) in self.shapes.iter().enumerate() {
            let w = self.weights(l);
            z.clear();
            z.extend_from_slice(self.bias(l));
            accumulate(z, &a[..ni], w);
            if l < last {
                relu(z);
            }
            std::mem::swap(a, z);
        }
        [a[0], a[1]]
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
                index: 0,
            });
        }
        let cap = self.max_width();
        let (mut a, mut z) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
        Ok(self.logits_into(x, &mut a, &mut z))
    }

    pub fn forward(&self, points: &PointCloud) -> Result<Vec<[f64; 2]>> {
        self.check_dim(points)?;
        let cap = self.max_width();
        let (mut a, mut z) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
        Ok(points
            .points()
            .map(|p| self.logits_into(p, &mut a, &mut z))
            .collect())
    }

    /// Class decisions; class 1 only when its logit is strictly larger.
    pub fn predict(&self, points: &PointCloud) -> Result<Vec<u8>> {
        Ok(self
            .forward(points)?
            .into_iter()
            .map(|l| u8::from(l[1] > l[0]))
            .collect())
    }

    pub fn predict_point(&self, x: &[f64]) -> Result<u8> {
        let l = self.logits(x)?;
        Ok(u8::from(l[1] > l[0]))
    }

    /// Misclassification rate over the given indices (all points if `None`).
    pub fn error_rate(&self, points: &PointCloud, labels: &[u8], indices: Option<&[usize]>) -> Result<f64> {
        self.check_dim(points)?;
        let cap = self.max_width();
        let (mut a, mut z) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
        let mut wrong = 0usize;
        let mut total = 0usize;
        let mut visit = |i: usize| {
            let l = self.logits_into(points.point(i), &mut a, &mut z);
            wrong += usize::from(u8::from(l[1] > l[0]) != labels[i]);
            total += 1;
        };
        match indices {
            Some(idx) => idx.iter().for_each(|&i| visit(i)),
            None => (0..points.len()).for_each(&mut visit),
        }
        Ok(if total == 0 { 0.0 } else { wrong as f64 / total as f64 })
    }

    fn check_dim(&self, points: &PointCloud) -> Result<()> {
        if points.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: points.dim(),
                index: 0,
            });
        }
        Ok(())
    }

    /// Mean softmax cross-entropy over `indices` and its gradient, written
    /// into `grad` (same layout as the parameters).
    pub fn loss_and_grad(
        &self,
        points: &PointCloud,
        labels: &[u8],
        indices: &[usize],
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> f64 {
        grad.fill(0.0);
        ws.prepare(self);
        let n_layers = self.shapes.len();
        let mut loss = 0.0;
        for &i in indices {
            let x = points.point(i);
            // forward, keeping every layer's activation
            ws.acts[0].clear();
            ws.acts[0].extend_from_slice(x);
            for l in 0..n_layers {
                let w = self.weights(l);
                let (prev, next) = ws.acts.split_at_mut(l + 1);
                let a = &prev[l];
                let z = &mut next[0];
                z.clear();
                z.extend_from_slice(self.bias(l));
                accumulate(z, a, w);
                if l + 1 < n_layers {
                    relu(z);
                }
            }
            let out = &ws.acts[n_layers];
            let m = out[0].max(out[1]);
            let (e0, e1) = ((out[0] - m).exp(), (out[1] - m).exp());
            let s = e0 + e1;
            let y = labels[i] as usize;
            loss += s.ln() + m - out[y];
            // backward
            let delta = &mut ws.delta;
            delta.clear();
            delta.push(e0 / s - f64::from(u8::from(y == 0)));
            delta.push(e1 / s - f64::from(u8::from(y == 1)));
            for l in (0..n_layers).rev() {
                let (ni, no) = self.shapes[l];
                let a = &ws.acts[l];
                let off = self.offsets[l];
                let (gw, gb) = grad[off..off + ni * no + no].split_at_mut(ni * no);
                for (g, &d) in gb.iter_mut().zip(delta.iter()) {
                    *g += d;
                }
                outer_accumulate(gw, a, delta);
                if l > 0 {
                    ws.back.clear();
                    back_project(&mut ws.back, a, self.weights(l), delta);
                    std::mem::swap(delta, &mut ws.back);
                }
            }
        }
        let scale = 1.0 / indices.len().max(1) as f64;
        for g in grad.iter_mut() {
            *g *= scale;
        }
        loss * scale
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, points: &PointCloud, labels: &[u8], indices: &[usize]) -> f64 {
        let cap = self.max_width();
        let (mut a, mut z) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
        let total: f64 = indices
            .iter()
            .map(|&i| {
                let out = self.logits_into(points.point(i), &mut a, &mut z);
                let m = out[0].max(out[1]);
                ((out[0] - m).exp() + (out[1] - m).exp()).ln() + m - out[labels[i] as usize]
            })
            .sum();
        total / indices.len().max(1) as f64
    }

    /// Flat binary layout: 8 magic bytes, then little-endian u64 values
    /// `input_dim, ell, h0, trunk_width`, then every layer's weights
    /// (row-major, inputs x outputs) and bias as little-endian f64.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        for v in [self.input_dim, self.arch.ell, self.arch.h0, self.arch.trunk_width] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Parse("not a model checkpoint".into()));
        }
        let mut header = [0usize; 4];
        for h in &mut header {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *h = u64::from_le_bytes(b) as usize;
        }
        let [input_dim, ell, h0, trunk_width] = header;
        let mut model = Self::zeros(Architecture::new(ell, h0, trunk_width)?, input_dim)?;
        for p in model.params.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *p = f64::from_le_bytes(b);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Parse(format!("{} trailing bytes in checkpoint", rest.len())));
        }
        Ok(model)
    }
}

/// Rectifier that propagates NaN.
fn relu(z: &mut [f64]) {
    for v in z {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Scratch space reused across gradient evaluations.
/// `z += a^T W` for row-major `W` (one row per entry of `a`).
#[inline]
fn accumulate(z: &mut [f64], a: &[f64], w: &[f64]) {
    if let Ok(z2) = <&mut [f64; 2]>::try_from(&mut *z) {
        for (&ak, row) in a.iter().zip(w.chunks_exact(2)) {
            z2[0] += ak * row[0];
            z2[1] += ak * row[1];
        }
        return;
    }
    let no = z.len();
    for (&ak, row) in a.iter().zip(w.chunks_exact(no)) {
        for (zj, &wj) in z.iter_mut().zip(row) {
            *zj += ak * wj;
        }
    }
}

/// `G += a d^T`.
#[inline]
fn outer_accumulate(g: &mut [f64], a: &[f64], d: &[f64]) {
    if let [d0, d1] = *d {
        for (&ak, row) in a.iter().zip(g.chunks_exact_mut(2)) {
            row[0] += ak * d0;
            row[1] += ak * d1;
        }
        return;
    }
    for (&ak, row) in a.iter().zip(g.chunks_exact_mut(d.len())) {
        for (gj, &dj) in row.iter_mut().zip(d) {
            *gj += ak * dj;
        }
    }
}

/// `W d` masked by the ReLU derivative at `a`.
#[inline]
fn back_project(out: &mut Vec<f64>, a: &[f64], w: &[f64], d: &[f64]) {
    if let [d0, d1] = *d {
        out.extend(a.iter().zip(w.chunks_exact(2)).map(|(&ak, row)| {
            let s = row[0] * d0 + row[1] * d1;
            if ak > 0.0 { s } else { 0.0 }
        }));
        return;
    }
    out.extend(a.iter().zip(w.chunks_exact(d.len())).map(|(&ak, row)| {
        let s: f64 = row.iter().zip(d).map(|(w, d)| w * d).sum();
        if ak > 0.0 { s } else { 0.0 }
    }));
}

#[derive(Debug, Default, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    back: Vec<f64>,
}

impl Workspace {
    fn prepare(&mut self, model: &MlpModel) {
        let n = model.shapes.len() + 1;
        if self.acts.len() != n {
            self.acts = vec![Vec::with_capacity(model.max_width()); n];
        }
    }
}

/// Weights drawn from N(0, 1/beta0), biases zero.
pub fn init_model(arch: Architecture, input_dim: usize, beta0: usize, seed: u64) -> Result<MlpModel> {
    if beta0 == 0 {
        return Err(Error::InvalidArchitecture("beta0 must be >= 1".into()));
    }
    let mut model = MlpModel::zeros(arch, input_dim)?;
    let normal = Normal::new(0.0, (1.0 / beta0 as f64).sqrt())
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in 0..model.num_layers() {
        for w in model.weights_mut(l) {
            *w = normal.sample(&mut rng);
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_shapes_chain() {
        let a = Architecture::new(1, 12, 2).unwrap();
        assert_eq!(a.layer_shapes(2), vec![(2, 12), (12, 2)]);
        let a = Architecture::new(3, 5, 4).unwrap();
        assert_eq!(a.layer_shapes(2), vec![(2, 5), (5, 4), (4, 4), (4, 2)]);
        let m = init_model(a, 2, 4, 0).unwrap();
        assert_eq!(m.params().len(), 2 * 5 + 5 + 5 * 4 + 4 + 4 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn zero_widths_rejected() {
        assert!(Architecture::new(0, 3, 3).is_err());
        assert!(Architecture::new(1, 0, 3).is_err());
        assert!(Architecture::new(2, 3, 0).is_err());
        assert!(Architecture::new(1, 501, 1).is_err());
        assert!(Architecture::new(7, 3, 3).unwrap().validate_replication().is_err());
        let bad = Architecture {
            ell: 1,
            h0: 0,
            trunk_width: 1,
        };
        assert!(init_model(bad, 2, 1, 0).is_err());
    }

    #[test]
    fn init_is_seeded_and_scaled() {
        let a = Architecture::new(1, 400, 1).unwrap();
        let m1 = init_model(a, 2, 4, 9).unwrap();
        assert_eq!(m1, init_model(a, 2, 4, 9).unwrap());
        assert_ne!(m1, init_model(a, 2, 4, 10).unwrap());
        let w = m1.weights(0);
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        assert!((var - 0.25).abs() < 0.05, "{var}");
        assert!(m1.bias(0).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_model_ties_to_class_zero() {
        let m = MlpModel::zeros(Architecture::new(2, 3, 3).unwrap(), 2).unwrap();
        let pts = PointCloud::new(&[vec![1.0, -2.0], vec![0.3, 0.4]]).unwrap();
        assert_eq!(m.forward(&pts).unwrap(), vec![[0.0, 0.0]; 2]);
        assert_eq!(m.predict(&pts).unwrap(), vec![0, 0]);
    }

    #[test]
    fn identity_like_weights_pass_inputs() {
        let mut m = MlpModel::zeros(Architecture::new(1, 2, 1).unwrap(), 2).unwrap();
        m.weights_mut(0).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        m.weights_mut(1).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.logits(&[0.5, 2.0]).unwrap(), [0.5, 2.0]);
        assert!(matches!(m.logits(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = init_model(Architecture::new(2, 4, 3).unwrap(), 2, 3, 1).unwrap();
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 32 + 8 * m.params().len());
        assert_eq!(MlpModel::read_checkpoint(&buf[..]).unwrap(), m);
        buf[0] = b'X';
        assert!(MlpModel::read_checkpoint(&buf[..]).is_err());
    }

    fn fd_check(arch: Architecture, seed: u64) -> f64 {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = init_model(arch, 2, 2, seed).unwrap();
        for b in 0..model.num_layers() {
            for v in model.bias_mut(b) {
                *v = rng.random_range(-0.5..0.5);
            }
        }
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let cloud = PointCloud::new(&pts).unwrap();
        let labels: Vec<u8> = (0..8).map(|i| (i % 2) as u8).collect();
        let idx: Vec<usize> = (0..8).collect();
        let mut grad = vec![0.0; model.params().len()];
        model.loss_and_grad(&cloud, &labels, &idx, &mut grad, &mut Workspace::default());
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for j in 0..grad.len() {
            let orig = model.params()[j];
            model.params_mut()[j] = orig + h;
            let up = model.loss(&cloud, &labels, &idx);
            model.params_mut()[j] = orig - h;
            let down = model.loss(&cloud, &labels, &idx);
            model.params_mut()[j] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (ell, seed) in (1..=4).zip(0..) {
            let arch = Architecture::new(ell, 5, 3).unwrap();
            let err = fd_check(arch, seed);
            assert!(err < 1e-4, "depth {ell}: {err}");
        }
    }
}
