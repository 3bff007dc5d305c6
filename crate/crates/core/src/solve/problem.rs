use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// `Σ terms_k x_k <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { terms, rhs }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, a)| a * x[k]).sum::<f64>() - self.rhs
    }
}

/// `Σ squares_k x_k² + Σ terms_k x_k <= rhs` with nonnegative square weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRow {
    pub squares: Vec<(usize, f64)>,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl QuadRow {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.squares.iter().map(|&(k, h)| h * x[k] * x[k]).sum::<f64>()
            + self.terms.iter().map(|&(k, a)| a * x[k]).sum::<f64>()
            - self.rhs
    }
}

/// Convex QCQP: minimize `½ xᵀPx + qᵀx + c` subject to box bounds, linear
/// rows and convex diagonal-quadratic rows.
#[derive(Debug, Clone)]
pub struct ConvexProblem {
    pub p: DMatrix<f64>,
    pub q: Vec<f64>,
    pub c: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub linear: Vec<LinearRow>,
    pub quad: Vec<QuadRow>,
}

impl ConvexProblem {
    pub fn new(n: usize) -> Self {
        Self {
            p: DMatrix::zeros(n, n),
            q: vec![0.0; n],
            c: 0.0,
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
            linear: Vec::new(),
            quad: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let mut quad = 0.0;
        for j in 0..n {
            if x[j] == 0.0 {
                continue;
            }
            for i in 0..n {
                quad += x[i] * self.p[(i, j)] * x[j];
            }
        }
        0.5 * quad + self.q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.c
    }

    /// Largest violation over bounds and rows, zero when feasible.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| (l - v).max(v - h));
        let rows = self.linear.iter().map(|r| r.value(x));
        let quads = self.quad.iter().map(|r| r.value(x));
        bounds.chain(rows).chain(quads).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub point: Vec<f64>,
    pub objective: f64,
    pub status: SubproblemStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}
