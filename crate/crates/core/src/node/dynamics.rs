use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::geometry::IntervalBox;
use crate::interval::Interval;
use crate::layers::FcLayer;
use crate::linalg::Matrix;

/// `ż = g(z)` with `g` a stack of fully-connected layers.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeDynamics {
    layers: Vec<FcLayer>,
    linear: bool,
}

/// `ż = Az + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOdeForm {
    pub a: Matrix,
    pub c: Vec<f64>,
}

impl LinearOdeForm {
    pub fn new(a: Matrix, c: Vec<f64>) -> Result<Self> {
        if !a.is_square() || a.rows() != c.len() || a.rows() == 0 {
            return Err(Error::shape(format!(
                "linear ODE with {}x{} matrix and offset of length {}",
                a.rows(),
                a.cols(),
                c.len()
            )));
        }
        Ok(LinearOdeForm { a, c })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.a.matvec(z)?;
        for (vi, ci) in v.iter_mut().zip(&self.c) {
            *vi += ci;
        }
        Ok(v)
    }
}

impl NodeDynamics {
    pub fn new(layers: Vec<FcLayer>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::shape("NODE dynamics without layers"));
        };
        let n = first.input_dim();
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(format!(
                    "dynamics layer {} outputs {} values, layer {} expects {}",
                    k,
                    pair[0].output_dim(),
                    k + 1,
                    pair[1].input_dim()
                )));
            }
        }
        let out = layers.last().map_or(0, FcLayer::output_dim);
        if out != n {
            return Err(Error::shape(format!(
                "dynamics map dimension {n} to {out}; a NODE needs equal dimensions"
            )));
        }
        for (k, l) in layers.iter().enumerate() {
            if let Some(a) = l.activation().all(l.output_dim()).find(|a| !a.is_smooth()) {
                return Err(Error::Unsupported(format!(
                    "{} activation in NODE dynamics layer {k}; dynamics need continuously differentiable activations",
                    a.name()
                )));
            }
        }
        let linear = layers.iter().all(|l| l.activation().is_linear());
        Ok(NodeDynamics { layers, linear })
    }

    pub fn layers(&self) -> &[FcLayer] {
        &self.layers
    }

    pub fn dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    /// True iff every activation is linear.
    pub fn is_linear(&self) -> bool {
        self.linear
    }

    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut x = z.to_vec();
        for l in &self.layers {
            x = l.eval(&x)?;
        }
        Ok(x)
    }

    /// `A = W_m⋯W_1`, `c = Σ_{i<m} (W_m⋯W_{i+1}) b_i + b_m`.
    pub fn collapse_linear(&self) -> Result<LinearOdeForm> {
        if !self.linear {
            return Err(Error::Unsupported(
                "only dynamics with linear activations collapse to ż = Az + c".into(),
            ));
        }
        let mut a = self.layers[0].weights().clone();
        let mut c = self.layers[0].bias().to_vec();
        for l in &self.layers[1..] {
            a = l.weights().matmul(&a)?;
            c = l.affine(&c)?;
        }
        LinearOdeForm::new(a, c)
    }

    /// Chain-rule Jacobian of `g` at `z`.
    pub fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        if z.len() != self.dim() {
            return Err(Error::shape("Jacobian point of wrong dimension"));
        }
        let mut x = z.to_vec();
        let mut jac = Matrix::identity(self.dim());
        for l in &self.layers {
            let pre = l.affine(&x)?;
            let mut step = l.weights().clone();
            for (i, p) in pre.iter().enumerate() {
                let d = l.activation().at(i).derivative(*p)?;
                for v in step.row_mut(i) {
                    *v *= d;
                }
            }
            jac = step.matmul(&jac)?;
            x = pre
                .iter()
                .enumerate()
                .map(|(i, p)| l.activation().at(i).eval(*p))
                .collect();
        }
        Ok(jac)
    }

    /// Interval image of `g` over a box.
    pub fn interval_eval(&self, b: &IntervalBox) -> Result<Vec<Interval>> {
        Ok(self.interval_pass(b, false)?.0)
    }

    /// Entrywise enclosure of the Jacobian over a box.
    pub fn interval_jacobian(&self, b: &IntervalBox) -> Result<IntervalMatrix> {
        Ok(self.interval_pass(b, true)?.1.expect("requested"))
    }

    fn interval_pass(&self, b: &IntervalBox, with_jacobian: bool) -> Result<(Vec<Interval>, Option<IntervalMatrix>)> {
        if b.dim() != self.dim() {
            return Err(Error::shape("interval box of wrong dimension"));
        }
        let mut x = b.intervals();
        let mut jac = with_jacobian.then(|| IntervalMatrix::from_real(&Matrix::identity(self.dim())));
        for l in &self.layers {
            let w = l.weights();
            let pre: Vec<Interval> = (0..l.output_dim())
                .map(|i| crate::interval::affine_row(w.row(i), &x, l.bias()[i]))
                .collect();
            if let Some(j) = jac.as_mut() {
                let d: Vec<Interval> = pre
                    .iter()
                    .enumerate()
                    .map(|(i, p)| l.activation().at(i).derivative_range(*p))
                    .collect::<Result<_>>()?;
                *j = IntervalMatrix::scaled_product(&d, w, j);
            }
            x = pre
                .iter()
                .enumerate()
                .map(|(i, p)| match l.activation().at(i) {
                    Activation::Linear => *p,
                    a => a.range(*p),
                })
                .collect();
        }
        Ok((x, jac))
    }
}

/// Dense matrix of intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IntervalMatrix {
    pub fn from_real(m: &Matrix) -> Self {
        IntervalMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().iter().map(|v| Interval::point(*v)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        self.data[i * self.cols + j]
    }

    /// `diag(d) · W · M`.
    fn scaled_product(d: &[Interval], w: &Matrix, m: &IntervalMatrix) -> IntervalMatrix {
        let mut data = vec![Interval::point(0.0); w.rows() * m.cols];
        for i in 0..w.rows() {
            for j in 0..m.cols {
                let mut acc = Interval::point(0.0);
                for (k, wik) in w.row(i).iter().enumerate() {
                    if *wik != 0.0 {
                        acc = acc + m.get(k, j).scale(*wik);
                    }
                }
                data[i * m.cols + j] = d[i] * acc;
            }
        }
        IntervalMatrix {
            rows: w.rows(),
            cols: m.cols,
            data,
        }
    }

    /// Whether `m` lies entrywise inside.
    pub fn contains(&self, m: &Matrix) -> bool {
        m.rows() == self.rows
            && m.cols() == self.cols
            && self.data.iter().zip(m.as_slice()).all(|(iv, v)| iv.contains(*v))
    }

    /// `(self − center) · x` for an interval vector `x`.
    pub fn deviation_times(&self, center: &Matrix, x: &[Interval]) -> Vec<Interval> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(Interval::point(0.0), |acc, j| {
                    let dev = self.get(i, j) - Interval::point(center[(i, j)]);
                    acc + dev * x[j]
                })
            })
            .collect()
    }
}
