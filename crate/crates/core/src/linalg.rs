//! Sparse off-diagonal kernels and a subtraction-free LU for absorbing chains.
//!
//! For a substochastic block `Q` over transient states the system `(I - Q) x = b`
//! is factored without ever forming `1 - Q(i,i)`: each pivot is rebuilt as the
//! row's escape mass plus its remaining off-diagonal mass (Grassmann-Taksar-Heyman
//! elimination). All quantities stay nonnegative, so exponentially small escape
//! probabilities keep full relative accuracy at large β.

use crate::error::{Error, Result};

/// Off-diagonal transition probabilities of a finite chain; the holding
/// probability of each state is implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Kernel {
    /// Rows must not contain the diagonal; zero entries are dropped.
    pub fn new(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        for (i, row) in rows.iter_mut().enumerate() {
            row.retain(|&(j, p)| {
                assert!(j != i, "kernel rows hold off-diagonal entries only");
                assert!(p >= 0.0 && p.is_finite(), "transition probability {p}");
                p > 0.0
            });
            row.sort_by_key(|&(j, _)| j);
        }
        Self { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn off(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    /// Probability of leaving `i` in one step.
    pub fn leave(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, p)| p).sum()
    }

    pub fn stay(&self, i: usize) -> f64 {
        (1.0 - self.leave(i)).max(0.0)
    }

    /// Entry `(i, j)` including the diagonal.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.stay(i)
        } else {
            self.off(i, j)
        }
    }

    /// Chain restricted to a one-dimensional subgraph: only moves between
    /// consecutive path states survive, everything else is held in place.
    /// Indices of the result follow the order of `path`.
    pub fn restrict_to_path(&self, path: &[usize]) -> Kernel {
        let k = path.len();
        let rows = (0..k)
            .map(|i| {
                let mut row = Vec::new();
                if i > 0 {
                    row.push((i - 1, self.off(path[i], path[i - 1])));
                }
                if i + 1 < k {
                    row.push((i + 1, self.off(path[i], path[i + 1])));
                }
                row
            })
            .collect();
        Kernel::new(rows)
    }

    /// μ P for a row vector μ.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n()).map(|i| mu[i] * self.stay(i)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            if mu[i] == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += mu[i] * p;
            }
        }
        out
    }

    /// P f for a column vector f.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.stay(i) * f[i] + self.rows[i].iter().map(|&(j, p)| p * f[j]).sum::<f64>())
            .collect()
    }
}

/// Factored `(I - Q)` for the transient block of a kernel.
#[derive(Clone, Debug)]
pub struct Absorbing {
    transient: Vec<usize>,
    local: Vec<Option<usize>>,
    a: Vec<f64>,
    pivot: Vec<f64>,
}

impl Absorbing {
    pub fn new(kernel: &Kernel, is_transient: &[bool]) -> Result<Self> {
        assert_eq!(is_transient.len(), kernel.n());
        let transient: Vec<usize> = (0..kernel.n()).filter(|&s| is_transient[s]).collect();
        let mut local = vec![None; kernel.n()];
        for (k, &s) in transient.iter().enumerate() {
            local[s] = Some(k);
        }
        let m = transient.len();
        let mut a = vec![0.0; m * m];
        let mut leak = vec![0.0; m];
        for (i, &s) in transient.iter().enumerate() {
            for &(t, p) in kernel.row(s) {
                match local[t] {
                    Some(j) => a[i * m + j] = p,
                    None => leak[i] += p,
                }
            }
        }
        let mut pivot = vec![0.0; m];
        for k in 0..m {
            let d = leak[k] + (k + 1..m).map(|j| a[k * m + j]).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::Singular(transient[k]));
            }
            pivot[k] = d;
            for i in k + 1..m {
                let q = a[i * m + k];
                if q == 0.0 {
                    continue;
                }
                let f = q / d;
                a[i * m + k] = f;
                for j in k + 1..m {
                    if j != i {
                        a[i * m + j] += f * a[k * m + j];
                    }
                }
                leak[i] += f * leak[k];
            }
        }
        Ok(Self { transient, local, a, pivot })
    }

    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    pub fn local(&self, s: usize) -> Option<usize> {
        self.local[s]
    }

    /// Solves `(I - Q) x = b` for `b ≥ 0` given on transient states (local order).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.transient.len();
        assert_eq!(b.len(), m);
        let mut y = b.to_vec();
        for k in 0..m {
            if y[k] == 0.0 {
                continue;
            }
            for i in k + 1..m {
                let f = self.a[i * m + k];
                if f != 0.0 {
                    y[i] += f * y[k];
                }
            }
        }
        let mut x = vec![0.0; m];
        for k in (0..m).rev() {
            let s: f64 = (k + 1..m).map(|j| self.a[k * m + j] * x[j]).sum();
            x[k] = (y[k] + s) / self.pivot[k];
        }
        x
    }

    /// Solution lifted to global indexing, zero off the transient set.
    pub fn solve_global(&self, b: &[f64]) -> Vec<f64> {
        let x = self.solve(b);
        let mut out = vec![0.0; self.local.len()];
        for (k, &s) in self.transient.iter().enumerate() {
            out[s] = x[k];
        }
        out
    }

    /// One-step probabilities from each transient state into `target`.
    pub fn one_step_into(&self, kernel: &Kernel, target: &[bool]) -> Vec<f64> {
        self.transient
            .iter()
            .map(|&s| kernel.row(s).iter().filter(|&&(t, _)| target[t]).map(|&(_, p)| p).sum())
            .collect()
    }
}

pub fn mask(n: usize, members: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &s in members {
        m[s] = true;
    }
    m
}
