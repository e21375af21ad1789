//! Flat parameter storage with named tensors, JSON checkpointing, and Adam.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::F;

/// One named tensor inside the flat vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Flat `f64` parameter vector plus its tensor layout.
#[derive(Debug, Clone, Default)]
pub struct Params {
    pub data: Vec<F>,
    layout: Vec<TensorSpec>,
    index: HashMap<String, usize>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a zero-initialized tensor and returns its offset.
    pub fn register(&mut self, name: &str, shape: &[usize]) -> usize {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter tensor {name}"
        );
        let offset = self.data.len();
        let len: usize = shape.iter().product();
        self.data.resize(offset + len, 0.0);
        self.index.insert(name.to_string(), self.layout.len());
        self.layout.push(TensorSpec {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
        });
        offset
    }

    pub fn spec(&self, name: &str) -> &TensorSpec {
        &self.layout[*self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter tensor {name}"))]
    }

    pub fn offset(&self, name: &str) -> usize {
        self.spec(name).offset
    }

    pub fn tensor(&self, name: &str) -> &[F] {
        let s = self.spec(name);
        &self.data[s.offset..s.offset + s.len()]
    }

    pub fn tensor_mut(&mut self, name: &str) -> &mut [F] {
        let s = self.spec(name).clone();
        &mut self.data[s.offset..s.offset + s.len()]
    }

    pub fn layout(&self) -> &[TensorSpec] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Fills a tensor with scaled-uniform (Xavier-style) values.
    pub fn init_uniform<R: Rng>(&mut self, name: &str, rng: &mut R) {
        let spec = self.spec(name).clone();
        let fan_in = if spec.shape.len() == 2 { spec.shape[1] } else { spec.len() };
        let bound = (1.0 / fan_in as F).sqrt();
        for v in self.tensor_mut(name) {
            *v = rng.gen_range(-bound..bound);
        }
    }

    /// Serializable manifest: every tensor by name with shape and row-major
    /// 64-bit data. `serde_json` prints floats with round-trip precision, so
    /// save/load is exact.
    pub fn to_manifest(&self) -> ParamsManifest {
        ParamsManifest {
            tensors: self
                .layout
                .iter()
                .map(|s| TensorData {
                    name: s.name.clone(),
                    shape: s.shape.clone(),
                    data: self.data[s.offset..s.offset + s.len()].to_vec(),
                })
                .collect(),
        }
    }

    /// Restores values from a manifest into an identically laid-out store.
    pub fn load_manifest(&mut self, manifest: &ParamsManifest) -> Result<(), String> {
        if manifest.tensors.len() != self.layout.len() {
            return Err(format!(
                "checkpoint has {} tensors, model expects {}",
                manifest.tensors.len(),
                self.layout.len()
            ));
        }
        for t in &manifest.tensors {
            let idx = self
                .index
                .get(&t.name)
                .ok_or_else(|| format!("checkpoint tensor {} unknown to this model", t.name))?;
            let spec = self.layout[*idx].clone();
            if spec.shape != t.shape {
                return Err(format!(
                    "tensor {} shape mismatch: checkpoint {:?} vs model {:?}",
                    t.name, t.shape, spec.shape
                ));
            }
            if t.data.len() != spec.len() {
                return Err(format!("tensor {} data length mismatch", t.name));
            }
            self.data[spec.offset..spec.offset + spec.len()].copy_from_slice(&t.data);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorData {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsManifest {
    pub tensors: Vec<TensorData>,
}

/// Adam with optional global-norm gradient clipping.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    max_grad_norm: F,
    m: Vec<F>,
    v: Vec<F>,
    t: u64,
}

impl Adam {
    pub fn new(lr: F, max_grad_norm: F, dim: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One update step; returns the pre-clip global gradient norm.
    pub fn step(&mut self, params: &mut [F], grad: &mut [F]) -> F {
        debug_assert_eq!(params.len(), grad.len());
        let norm = grad.iter().map(|g| g * g).sum::<F>().sqrt();
        if self.max_grad_norm > 0.0 && norm > self.max_grad_norm {
            let scale = self.max_grad_norm / norm;
            for g in grad.iter_mut() {
                *g *= scale;
            }
        }
        if self.lr == 0.0 {
            return norm;
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn manifest_round_trip_is_exact() {
        let mut p = Params::new();
        p.register("a.w", &[2, 3]);
        p.register("a.b", &[2]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        p.init_uniform("a.w", &mut rng);
        p.init_uniform("a.b", &mut rng);
        let json = serde_json::to_string(&p.to_manifest()).unwrap();
        let manifest: ParamsManifest = serde_json::from_str(&json).unwrap();
        let mut q = Params::new();
        q.register("a.w", &[2, 3]);
        q.register("a.b", &[2]);
        q.load_manifest(&manifest).unwrap();
        assert_eq!(p.data, q.data);
    }

    #[test]
    fn manifest_shape_mismatch_is_rejected() {
        let mut p = Params::new();
        p.register("w", &[2, 2]);
        let manifest = ParamsManifest {
            tensors: vec![TensorData {
                name: "w".into(),
                shape: vec![4],
                data: vec![0.0; 4],
            }],
        };
        let mut q = Params::new();
        q.register("w", &[2, 2]);
        assert!(q.load_manifest(&manifest).is_err());
        assert!(p.load_manifest(&ParamsManifest { tensors: vec![] }).is_err());
    }

    #[test]
    fn adam_zero_lr_leaves_params_untouched() {
        let mut params = vec![1.0, -2.0, 0.5];
        let snapshot = params.clone();
        let mut opt = Adam::new(0.0, 0.5, 3);
        let mut grad = vec![0.3, -0.1, 0.9];
        opt.step(&mut params, &mut grad);
        assert_eq!(params, snapshot);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut params = vec![3.0, -4.0];
        let mut opt = Adam::new(0.05, 0.0, 2);
        for _ in 0..2000 {
            let mut grad: Vec<F> = params.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut params, &mut grad);
        }
        assert!(params.iter().all(|x| x.abs() < 1e-3), "{params:?}");
    }
}
