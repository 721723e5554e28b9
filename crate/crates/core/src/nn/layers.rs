use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::linalg::{sigmoid, Matrix};
use crate::seed::Rng;

/// Affine layer `y = x W^T + b` with `W` stored `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights and biases.
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let w = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let b = (0..outputs).map(|_| rng.random_range(-bound..bound)).collect();
        Dense {
            weights: Matrix::from_vec(outputs, inputs, w),
            bias: b,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let (n, inp, out) = (x.rows(), self.inputs(), self.outputs());
        let mut y = Matrix::zeros(n, out);
        for i in 0..n {
            let xi = x.row(i);
            let yi = y.row_mut(i);
            for (o, yo) in yi.iter_mut().enumerate() {
                let w = self.weights.row(o);
                let mut acc = self.bias[o];
                for k in 0..inp {
                    acc += xi[k] * w[k];
                }
                *yo = acc;
            }
        }
        y
    }

    /// Returns `(dX, dW, db)`.
    pub fn backward(&self, x: &Matrix, dy: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
        let (n, inp, out) = (x.rows(), self.inputs(), self.outputs());
        let mut dx = Matrix::zeros(n, inp);
        let mut dw = vec![0.0; out * inp];
        let mut db = vec![0.0; out];
        for i in 0..n {
            let xi = x.row(i);
            let dyi = dy.row(i);
            let dxi = dx.row_mut(i);
            for o in 0..out {
                let g = dyi[o];
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                let w = self.weights.row(o);
                let dwo = &mut dw[o * inp..(o + 1) * inp];
                for k in 0..inp {
                    dwo[k] += g * xi[k];
                    dxi[k] += g * w[k];
                }
            }
        }
        (dx, dw, db)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
        }
    }

    pub fn forward(self, x: &Matrix) -> Matrix {
        let mut y = x.clone();
        y.data_mut().iter_mut().for_each(|v| *v = self.apply(*v));
        y
    }

    pub fn backward(self, x: &Matrix, y: &Matrix, dy: &Matrix) -> Matrix {
        let mut dx = dy.clone();
        for ((d, &xi), &yi) in dx.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
            *d *= match self {
                Activation::Tanh => 1.0 - yi * yi,
                Activation::Relu => {
                    if xi > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Sigmoid => yi * (1.0 - yi),
            };
        }
        dx
    }
}
