use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n_nodes: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n_nodes: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || n_nodes < 2 {
            return Err(Error::invalid(format!("bad axis [{lo}, {hi}] with {n_nodes} nodes")));
        }
        Ok(Self { lo, hi, n_nodes })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n_nodes - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_nodes {
            self.hi
        } else {
            self.lo + self.step() * i as f64
        }
    }

    fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_nodes {
            0.5 * self.step()
        } else {
            self.step()
        }
    }
}

/// Regular tensor grid in one or two dimensions, integrated with the
/// trapezoidal rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid("quadrature grids are 1D or 2D"));
        }
        Ok(Self { axes })
    }

    pub fn uniform_1d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![Axis::new(lo, hi, n)?])
    }

    pub fn square_2d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let a = Axis::new(lo, hi, n)?;
        Self::new(vec![a, a])
    }

    /// `[-10 s, 10 s]` with 10^4 nodes, `s` the widest standard deviation.
    pub fn default_1d(sigma_max: f64) -> Result<Self> {
        Self::uniform_1d(-10.0 * sigma_max, 10.0 * sigma_max, 10_000)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.n_nodes).product()
    }

    /// Visits every node (last axis fastest) with its quadrature weight.
    pub fn for_each_node(&self, mut f: impl FnMut(&[f64], f64)) {
        match self.axes.as_slice() {
            [a] => {
                for i in 0..a.n_nodes {
                    f(&[a.node(i)], a.trapezoid_weight(i));
                }
            }
            [a, b] => {
                for i in 0..a.n_nodes {
                    let (x, wx) = (a.node(i), a.trapezoid_weight(i));
                    for j in 0..b.n_nodes {
                        f(&[x, b.node(j)], wx * b.trapezoid_weight(j));
                    }
                }
            }
            _ => unreachable!("grid dimension checked at construction"),
        }
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_node(|x, w| acc += w * f(x));
        acc
    }
}
