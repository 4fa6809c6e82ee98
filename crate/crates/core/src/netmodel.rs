//! Deep linear network architectures, training data, the regularized loss
//! and its gradient system.
//!
//! Weights are flattened layer-major: all of `W_1` in row-major order, then
//! `W_2`, and so on up to `W_{H+1}`. `W_k` has shape `d_k x d_{k-1}` with
//! `d_0 = d_x` and `d_{H+1} = d_y`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::polycore::{Complex, PolyError, PolySystem, Polynomial};
use crate::rng;

/// Λ entries below this are re-drawn when sampling.
pub const LAMBDA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("cannot parse architecture `{input}`: {msg}")]
    Parse { input: String, msg: String },
    #[error("{what} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        what: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("weight vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Layer widths of a deep linear network plus the number of data points.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub m: usize,
    pub dx: usize,
    pub dy: usize,
    pub hidden: Vec<usize>,
}

/// Position of one weight variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightIndex {
    /// 1-based layer, `1..=H+1`.
    pub layer: usize,
    pub row: usize,
    pub col: usize,
    pub flat: usize,
}

impl Architecture {
    pub fn new(m: usize, dx: usize, dy: usize, hidden: Vec<usize>) -> Result<Self, ModelError> {
        if hidden.is_empty() {
            return Err(ModelError::InvalidArchitecture(
                "at least one hidden layer is required".into(),
            ));
        }
        if m == 0 {
            return Err(ModelError::InvalidArchitecture("m must be positive".into()));
        }
        if dx == 0 || dy == 0 || hidden.contains(&0) {
            return Err(ModelError::InvalidArchitecture(
                "all layer widths must be positive".into(),
            ));
        }
        Ok(Self { m, dx, dy, hidden })
    }

    /// `h` hidden layers of equal width `d`.
    pub fn uniform(h: usize, m: usize, dx: usize, dy: usize, d: usize) -> Result<Self, ModelError> {
        Self::new(m, dx, dy, vec![d; h])
    }

    /// Number of hidden layers `H`.
    pub fn h(&self) -> usize {
        self.hidden.len()
    }

    pub fn with_m(&self, m: usize) -> Result<Self, ModelError> {
        Self::new(m, self.dx, self.dy, self.hidden.clone())
    }

    /// `[d_x, d_1, ..., d_H, d_y]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.dx);
        w.extend(&self.hidden);
        w.push(self.dy);
        w
    }

    /// Number of weight matrices, `H + 1`.
    pub fn num_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    /// `(rows, cols)` of `W_layer`, 1-based.
    pub fn layer_shape(&self, layer: usize) -> (usize, usize) {
        let w = self.widths();
        (w[layer], w[layer - 1])
    }

    /// Flat index of the first entry of `W_layer`.
    pub fn layer_offset(&self, layer: usize) -> usize {
        (1..layer)
            .map(|k| {
                let (r, c) = self.layer_shape(k);
                r * c
            })
            .sum()
    }

    /// Total number of weights `N`.
    pub fn num_weights(&self) -> usize {
        let w = self.widths();
        w.windows(2).map(|p| p[0] * p[1]).sum()
    }

    pub fn flat_index(&self, layer: usize, row: usize, col: usize) -> usize {
        let (_, cols) = self.layer_shape(layer);
        self.layer_offset(layer) + row * cols + col
    }

    /// All weight positions in flat order.
    pub fn weight_indices(&self) -> Vec<WeightIndex> {
        let mut out = Vec::with_capacity(self.num_weights());
        for layer in 1..=self.num_layers() {
            let (rows, cols) = self.layer_shape(layer);
            for row in 0..rows {
                for col in 0..cols {
                    out.push(WeightIndex {
                        layer,
                        row,
                        col,
                        flat: out.len(),
                    });
                }
            }
        }
        out
    }

    /// Flat indices of each weight matrix, `W_1` first.
    pub fn layer_groups(&self) -> Vec<Vec<usize>> {
        (1..=self.num_layers())
            .map(|layer| {
                let (r, c) = self.layer_shape(layer);
                let off = self.layer_offset(layer);
                (off..off + r * c).collect()
            })
            .collect()
    }

    /// Variable names `w<layer>_<row>_<col>`, 1-based.
    pub fn var_names(&self) -> Vec<String> {
        self.weight_indices()
            .iter()
            .map(|w| format!("w{}_{}_{}", w.layer, w.row + 1, w.col + 1))
            .collect()
    }

    /// Splits a flat weight vector into `W_1, ..., W_{H+1}`.
    pub fn split_weights<T: Clone + nalgebra::Scalar>(&self, flat: &[T]) -> Vec<DMatrix<T>> {
        (1..=self.num_layers())
            .map(|layer| {
                let (r, c) = self.layer_shape(layer);
                let off = self.layer_offset(layer);
                DMatrix::from_row_slice(r, c, &flat[off..off + r * c])
            })
            .collect()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = if self.hidden.iter().all(|&d| d == self.hidden[0]) {
            self.hidden[0].to_string()
        } else {
            self.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(":")
        };
        write!(f, "H={},m={},dx={},dy={},d={}", self.h(), self.m, self.dx, self.dy, d)
    }
}

/// Parses `H=1,m=2,dx=3,dy=2,d=1` or `m=1,dx=2,dy=2,d=2:3`.
impl FromStr for Architecture {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |msg: &str| ModelError::Parse {
            input: s.to_string(),
            msg: msg.to_string(),
        };
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| err("expected key=value"))?;
            let key = k.trim().to_string();
            if !matches!(key.as_str(), "H" | "m" | "dx" | "dy" | "d") {
                return Err(err(&format!("unknown key `{key}`")));
            }
            if fields.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(err(&format!("duplicate key `{key}`")));
            }
        }
        let num = |key: &str| -> Result<usize, ModelError> {
            fields
                .get(key)
                .ok_or_else(|| err(&format!("missing `{key}`")))?
                .parse()
                .map_err(|_| err(&format!("`{key}` is not a nonnegative integer")))
        };
        let m = num("m")?;
        let dx = num("dx")?;
        let dy = num("dy")?;
        let d = fields.get("d").ok_or_else(|| err("missing `d`"))?;
        let dims: Vec<usize> = d
            .split(':')
            .map(|v| v.trim().parse().map_err(|_| err("bad hidden width")))
            .collect::<Result<_, _>>()?;
        let hidden = match (fields.contains_key("H"), dims.len()) {
            (true, 1) => vec![dims[0]; num("H")?],
            (true, n) if n == num("H")? => dims,
            (true, _) => return Err(err("H disagrees with the number of widths in d")),
            (false, _) => dims,
        };
        Architecture::new(m, dx, dy, hidden).map_err(|e| err(&e.to_string()))
    }
}

/// Training data and regularization matrices for one system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    /// Inputs as columns, `d_x x m`.
    pub x: DMatrix<f64>,
    /// Outputs as columns, `d_y x m`.
    pub y: DMatrix<f64>,
    /// `Λ_1, ..., Λ_{H+1}`, each shaped like the matching weight matrix.
    pub lambdas: Vec<DMatrix<f64>>,
    pub seed: u64,
}

impl TrainingInstance {
    pub fn new(
        arch: &Architecture,
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        lambdas: Vec<DMatrix<f64>>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let inst = Self { x, y, lambdas, seed };
        inst.check_shapes(arch)?;
        Ok(inst)
    }

    pub fn check_shapes(&self, arch: &Architecture) -> Result<(), ModelError> {
        let check = |what: String, m: &DMatrix<f64>, want: (usize, usize)| {
            if m.shape() != want {
                Err(ModelError::ShapeMismatch {
                    what,
                    expected: want,
                    got: m.shape(),
                })
            } else {
                Ok(())
            }
        };
        check("X".into(), &self.x, (arch.dx, arch.m))?;
        check("Y".into(), &self.y, (arch.dy, arch.m))?;
        if self.lambdas.len() != arch.num_layers() {
            return Err(ModelError::InvalidArchitecture(format!(
                "{} regularization matrices for {} layers",
                self.lambdas.len(),
                arch.num_layers()
            )));
        }
        for (k, l) in self.lambdas.iter().enumerate() {
            check(format!("Λ_{}", k + 1), l, arch.layer_shape(k + 1))?;
        }
        Ok(())
    }

    /// `Σ_k x_k x_k^T`.
    pub fn input_gram(&self) -> DMatrix<f64> {
        &self.x * self.x.transpose()
    }

    /// `Σ_k y_k x_k^T`.
    pub fn cross_moment(&self) -> DMatrix<f64> {
        &self.y * self.x.transpose()
    }
}

/// Draws an instance: `X` then `Y` entries (row-major) standard normal, then
/// `Λ_1, ..., Λ_{H+1}` entries (row-major) uniform on `(0, 1)`, re-drawing
/// any Λ entry below [`LAMBDA_FLOOR`].
pub fn sample_instance(arch: &Architecture, seed: u64) -> TrainingInstance {
    let mut r = rng::seeded(seed);
    let mut normal = |rows: usize, cols: usize| {
        let v: Vec<f64> = (0..rows * cols).map(|_| rng::standard_normal(&mut r)).collect();
        DMatrix::from_row_slice(rows, cols, &v)
    };
    let x = normal(arch.dx, arch.m);
    let y = normal(arch.dy, arch.m);
    let lambdas = (1..=arch.num_layers())
        .map(|layer| {
            let (rows, cols) = arch.layer_shape(layer);
            let v: Vec<f64> = (0..rows * cols)
                .map(|_| loop {
                    let u = rng::uniform01(&mut r);
                    if u >= LAMBDA_FLOOR {
                        break u;
                    }
                })
                .collect();
            DMatrix::from_row_slice(rows, cols, &v)
        })
        .collect();
    TrainingInstance { x, y, lambdas, seed }
}

/// Dense matrix of polynomials, only what the gradient builder needs.
#[derive(Clone)]
struct PolyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Polynomial>,
}

impl PolyMatrix {
    fn identity(n: usize, nvars: usize) -> Self {
        let mut data = vec![Polynomial::zero(nvars); n * n];
        for i in 0..n {
            data[i * n + i] = Polynomial::constant(nvars, Complex::new(1.0, 0.0));
        }
        Self { rows: n, cols: n, data }
    }

    fn weights(arch: &Architecture, layer: usize) -> Self {
        let n = arch.num_weights();
        let (rows, cols) = arch.layer_shape(layer);
        let data = (0..rows * cols)
            .map(|k| Polynomial::variable(n, arch.layer_offset(layer) + k).expect("index in range"))
            .collect();
        Self { rows, cols, data }
    }

    fn at(&self, i: usize, j: usize) -> &Polynomial {
        &self.data[i * self.cols + j]
    }

    fn mul(&self, other: &PolyMatrix) -> PolyMatrix {
        let nvars = self.data[0].nvars();
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Polynomial::zero(nvars);
                for k in 0..self.cols {
                    let t = self.at(i, k).mul(other.at(k, j)).expect("same nvars");
                    acc = acc.add(&t).expect("same nvars");
                }
                data.push(acc);
            }
        }
        PolyMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    fn mul_real(&self, m: &DMatrix<f64>) -> PolyMatrix {
        let nvars = self.data[0].nvars();
        let mut data = Vec::with_capacity(self.rows * m.ncols());
        for i in 0..self.rows {
            for j in 0..m.ncols() {
                let mut acc = Polynomial::zero(nvars);
                for k in 0..self.cols {
                    let t = self.at(i, k).scale(Complex::new(m[(k, j)], 0.0));
                    acc = acc.add(&t).expect("same nvars");
                }
                data.push(acc);
            }
        }
        PolyMatrix {
            rows: self.rows,
            cols: m.ncols(),
            data,
        }
    }

    fn sub_real(&self, m: &DMatrix<f64>) -> PolyMatrix {
        let nvars = self.data[0].nvars();
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let c = Polynomial::constant(nvars, Complex::new(m[(i, j)], 0.0));
                out.data[i * self.cols + j] = self.at(i, j).sub(&c).expect("same nvars");
            }
        }
        out
    }

    fn transpose(&self) -> PolyMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.at(i, j).clone());
            }
        }
        PolyMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// The gradient system `∂L^Λ/∂W_i = U_i^T (W Σx_k x_k^T − Σy_k x_k^T) V_i^T + Λ_i ∘ W_i`
/// with `U_i = W_{H+1}···W_{i+1}` and `V_i = W_{i-1}···W_1`, one polynomial
/// per weight in flat order.
pub fn build_gradient_system(
    arch: &Architecture,
    inst: &TrainingInstance,
) -> Result<PolySystem, ModelError> {
    inst.check_shapes(arch)?;
    let n = arch.num_weights();
    let layers = arch.num_layers();
    let ws: Vec<PolyMatrix> = (1..=layers).map(|l| PolyMatrix::weights(arch, l)).collect();

    // v[i] = W_i ··· W_1 (v[0] = I), u[i] = W_{H+1} ··· W_{i+1} (u[H+1] = I).
    let mut v = vec![PolyMatrix::identity(arch.dx, n)];
    for w in &ws {
        let next = w.mul(v.last().expect("nonempty"));
        v.push(next);
    }
    let mut u = vec![PolyMatrix::identity(arch.dy, n); layers + 1];
    for i in (0..layers).rev() {
        u[i] = u[i + 1].mul(&ws[i]);
    }
    let full = &v[layers];
    let residual = full.mul_real(&inst.input_gram()).sub_real(&inst.cross_moment());

    let mut polys = Vec::with_capacity(n);
    for layer in 1..=layers {
        let right = residual.mul(&v[layer - 1].transpose());
        let grad = u[layer].transpose().mul(&right);
        let lam = &inst.lambdas[layer - 1];
        for r in 0..grad.rows {
            for c in 0..grad.cols {
                let reg = ws[layer - 1].at(r, c).scale(Complex::new(lam[(r, c)], 0.0));
                polys.push(grad.at(r, c).add(&reg)?);
            }
        }
    }
    Ok(PolySystem::new(polys, arch.var_names())?)
}

/// `½ Σ_k ‖W x_k − y_k‖² + ½ Σ_i Σ_jk λ_ijk w_ijk²` at real weights, the
/// function whose gradient is [`build_gradient_system`]. For positive `Λ`
/// the penalty is `½ ‖√Λ_i ∘ W_i‖_F²`.
pub fn loss_value(
    arch: &Architecture,
    inst: &TrainingInstance,
    weights: &[f64],
) -> Result<f64, ModelError> {
    if weights.len() != arch.num_weights() {
        return Err(ModelError::LengthMismatch {
            expected: arch.num_weights(),
            got: weights.len(),
        });
    }
    inst.check_shapes(arch)?;
    let ws = arch.split_weights(weights);
    let mut prod = DMatrix::<f64>::identity(arch.dx, arch.dx);
    for w in &ws {
        prod = w * prod;
    }
    let fit = (&prod * &inst.x - &inst.y).norm_squared();
    let reg: f64 = ws
        .iter()
        .zip(&inst.lambdas)
        .map(|(w, l)| w.component_mul(w).dot(l))
        .sum();
    Ok(0.5 * (fit + reg))
}

/// Whether gradient systems for `m1` and `m2` data points (everything else
/// fixed, data drawn from `seed`) have identical per-polynomial supports.
pub fn compare_supports(
    arch: &Architecture,
    m1: usize,
    m2: usize,
    seed: u64,
) -> Result<bool, ModelError> {
    let a1 = arch.with_m(m1)?;
    let a2 = arch.with_m(m2)?;
    let s1 = build_gradient_system(&a1, &sample_instance(&a1, seed))?;
    let s2 = build_gradient_system(&a2, &sample_instance(&a2, seed))?;
    Ok(s1.supports() == s2.supports())
}

/// The worked 4-variable example: `W_1 = [α1 α2]`, `W_2 = [β1; β2]`,
/// `X = [[1,2],[3,4]]`, `Y = [[1,3],[2,4]]`, `Λ_1 = [4, −3]`, `Λ_2 = [−2; 5]`.
pub fn four_variable_example() -> (Architecture, TrainingInstance) {
    let arch = Architecture::new(2, 2, 2, vec![1]).expect("valid");
    let inst = TrainingInstance::new(
        &arch,
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]),
        vec![
            DMatrix::from_row_slice(1, 2, &[4.0, -3.0]),
            DMatrix::from_row_slice(2, 1, &[-2.0, 5.0]),
        ],
        0,
    )
    .expect("shapes match");
    (arch, inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let a: Architecture = "H=1,m=2,dx=3,dy=2,d=1".parse().unwrap();
        assert_eq!(a, Architecture::new(2, 3, 2, vec![1]).unwrap());
        assert_eq!(a.to_string(), "H=1,m=2,dx=3,dy=2,d=1");
        let b: Architecture = "m=1,dx=2,dy=2,d=2:3".parse().unwrap();
        assert_eq!(b.hidden, vec![2, 3]);
        assert_eq!(b.to_string(), "H=2,m=1,dx=2,dy=2,d=2:3");
        let c: Architecture = "H=2,m=1,dx=1,dy=1,d=2".parse().unwrap();
        assert_eq!(c.hidden, vec![2, 2]);
        assert!("H=2,m=1,dx=1,dy=1,d=2:3:4".parse::<Architecture>().is_err());
        assert!("H=1,m=0,dx=1,dy=1,d=1".parse::<Architecture>().is_err());
        assert!("H=1,m=1,dx=1,d=1".parse::<Architecture>().is_err());
        assert!("H=1,m=1,dx=1,dy=1,d=1,z=3".parse::<Architecture>().is_err());
    }

    #[test]
    fn weight_count_and_indexing() {
        let a = Architecture::new(1, 3, 2, vec![4, 5]).unwrap();
        assert_eq!(a.num_weights(), 3 * 4 + 4 * 5 + 5 * 2);
        let idx = a.weight_indices();
        assert_eq!(idx.len(), a.num_weights());
        for w in &idx {
            assert_eq!(a.flat_index(w.layer, w.row, w.col), w.flat);
        }
        assert_eq!(idx[12].layer, 2);
        assert_eq!((idx[12].row, idx[12].col), (0, 0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = Architecture::uniform(2, 2, 2, 3, 2).unwrap();
        assert_eq!(sample_instance(&a, 11), sample_instance(&a, 11));
        assert_ne!(sample_instance(&a, 11), sample_instance(&a, 12));
        let inst = sample_instance(&a, 5);
        assert!(inst.lambdas.iter().all(|l| l.iter().all(|&v| (LAMBDA_FLOOR..1.0).contains(&v))));
        inst.check_shapes(&a).unwrap();
    }

    #[test]
    fn normal_draws_have_unit_variance() {
        let a = Architecture::new(10_000, 1, 1, vec![1]).unwrap();
        let inst = sample_instance(&a, 3);
        let n = inst.x.len() as f64;
        let mean = inst.x.sum() / n;
        let var = inst.x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn smallest_network_gives_two_cubics() {
        let a = Architecture::uniform(1, 1, 1, 1, 1).unwrap();
        let sys = build_gradient_system(&a, &sample_instance(&a, 1)).unwrap();
        assert_eq!(sys.len(), 2);
        assert_eq!(sys.nvars(), 2);
        assert_eq!(sys.degrees(), vec![3, 3]);
    }

    #[test]
    fn loss_at_zero_weights() {
        let a = Architecture::uniform(1, 3, 2, 2, 2).unwrap();
        let inst = sample_instance(&a, 9);
        let l = loss_value(&a, &inst, &vec![0.0; a.num_weights()]).unwrap();
        assert!((l - 0.5 * inst.y.norm_squared()).abs() < 1e-12);
        assert!(loss_value(&a, &inst, &[0.0]).is_err());
    }

    #[test]
    fn loss_vanishes_at_perfect_fit_without_regularization() {
        // W_2 W_1 = I on 2-d data with hidden width 2.
        let a = Architecture::uniform(1, 2, 2, 2, 2).unwrap();
        let mut inst = sample_instance(&a, 4);
        inst.y = inst.x.clone();
        inst.lambdas.iter_mut().for_each(|l| l.fill(0.0));
        let w = [2.0, 1.0, 0.0, 1.0, 0.5, -0.5, 0.0, 1.0];
        assert!(loss_value(&a, &inst, &w).unwrap().abs() < 1e-24);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Architecture::uniform(1, 2, 2, 2, 1).unwrap();
        let mut inst = sample_instance(&a, 1);
        inst.x = DMatrix::zeros(3, 2);
        assert!(matches!(
            build_gradient_system(&a, &inst),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }
}
