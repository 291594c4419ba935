use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named weight matrix (biases are `1 x n`) and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

/// Flat parameter store for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    params: Vec<Param>,
    init_seed: u64,
}

/// Serializable form of a named array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl NetParams {
    pub fn new(init_seed: u64) -> Self {
        Self {
            params: Vec::new(),
            init_seed,
        }
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// Registers a `rows x cols` parameter drawn uniformly from `[-bound, bound]`.
    pub(crate) fn add(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let value = Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound));
        self.params.push(Param {
            name: name.into(),
            grad: Array2::zeros((rows, cols)),
            value,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn value(&self, idx: usize) -> &Array2<f64> {
        &self.params[idx].value
    }

    pub fn grad_mut(&mut self, idx: usize) -> &mut Array2<f64> {
        &mut self.params[idx].grad
    }

    pub fn param(&self, idx: usize) -> &Param {
        &self.params[idx]
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn fill(&mut self, v: f64) {
        for p in &mut self.params {
            p.value.fill(v);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|v| v.is_finite()))
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.grad.iter().copied())
            .collect()
    }

    /// Mutable access to scalar `k` of the flattened parameter vector.
    pub fn scalar_mut(&mut self, mut k: usize) -> &mut f64 {
        for p in &mut self.params {
            if k < p.value.len() {
                let cols = p.value.ncols();
                return &mut p.value[(k / cols, k % cols)];
            }
            k -= p.value.len();
        }
        panic!("scalar index out of range");
    }

    /// Name and position of scalar `k`.
    pub fn locate(&self, mut k: usize) -> (String, usize, usize) {
        for p in &self.params {
            if k < p.value.len() {
                let cols = p.value.ncols();
                return (p.name.clone(), k / cols, k % cols);
            }
            k -= p.value.len();
        }
        panic!("scalar index out of range");
    }

    pub fn to_records(&self) -> Vec<ArrayRecord> {
        self.params
            .iter()
            .map(|p| ArrayRecord {
                name: p.name.clone(),
                shape: [p.value.nrows(), p.value.ncols()],
                data: p.value.iter().copied().collect(),
            })
            .collect()
    }

    /// Overwrites values from records; names and shapes must match exactly.
    pub fn load_records(&mut self, records: &[ArrayRecord]) -> Result<()> {
        if records.len() != self.params.len() {
            return Err(Error::Corrupt(format!(
                "expected {} arrays, found {}",
                self.params.len(),
                records.len()
            )));
        }
        for (p, r) in self.params.iter_mut().zip(records) {
            if p.name != r.name || [p.value.nrows(), p.value.ncols()] != r.shape {
                return Err(Error::Corrupt(format!(
                    "array {} {:?} does not match expected {} {:?}",
                    r.name,
                    r.shape,
                    p.name,
                    p.value.dim()
                )));
            }
            p.value = Array2::from_shape_vec((r.shape[0], r.shape[1]), r.data.clone())
                .map_err(|e| Error::Corrupt(e.to_string()))?;
            p.grad.fill(0.0);
        }
        Ok(())
    }
}
