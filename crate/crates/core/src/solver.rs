//! Minimization of the reduced functional
//!
//! ```text
//! J(u) = ||L u - b||^2 + beta ||u - F||^2
//! ```
//!
//! by conjugate gradients on its normal equations
//! `(L^T L + beta I) u = L^T b + beta F`, plus a dense direct solve used as a
//! test oracle and a search over candidate `beta` values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DataBlock;
use crate::operator::AssembledSystem;
use crate::pipeline::{median_lower, run_batch, PipelineConfig};
use crate::sparse::{dot, norm2};

/// Largest system [`dense_oracle_solve`] accepts.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub beta: f64,
    pub cg_tol: f64,
    /// `None` means ten times the number of unknowns.
    pub cg_max_iter: Option<usize>,
    pub row_normalize: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 0.01,
            cg_tol: 1e-8,
            cg_max_iter: None,
            row_normalize: true,
        }
    }
}

impl SolverConfig {
    /// Checks the production ranges. `beta` must lie in (0, 1); tests that
    /// probe the limits construct configs directly and skip this.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::Config(format!(
                "cg_tol must be positive, got {}",
                self.cg_tol
            )));
        }
        if self.cg_max_iter == Some(0) {
            return Err(Error::Config("cg_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub functional_value: f64,
    pub converged: bool,
}

fn check_len(sys: &AssembledSystem, u: &[f64]) -> Result<()> {
    if u.len() == sys.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: sys.len(),
            got: u.len(),
        })
    }
}

/// `||L u - b||^2 + beta ||u - F||^2`.
pub fn eval_functional(sys: &AssembledSystem, u: &[f64], beta: f64) -> Result<f64> {
    check_len(sys, u)?;
    let lu = sys.l.matvec(u)?;
    let residual: f64 = lu.iter().zip(&sys.b).map(|(a, b)| (a - b) * (a - b)).sum();
    let fit: f64 = u.iter().zip(&sys.f).map(|(a, f)| (a - f) * (a - f)).sum();
    Ok(residual + beta * fit)
}

/// `2 L^T (L u - b) + 2 beta (u - F)`.
pub fn eval_gradient(sys: &AssembledSystem, u: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_len(sys, u)?;
    let r: Vec<f64> = sys
        .l
        .matvec(u)?
        .iter()
        .zip(&sys.b)
        .map(|(a, b)| a - b)
        .collect();
    let lt = sys.l.tmatvec(&r)?;
    Ok(lt
        .iter()
        .zip(u.iter().zip(&sys.f))
        .map(|(g, (x, f))| 2.0 * g + 2.0 * beta * (x - f))
        .collect())
}

/// `(L^T L + beta I) x`.
fn normal_apply(sys: &AssembledSystem, x: &[f64], beta: f64) -> Vec<f64> {
    let lx = sys.l.matvec(x).expect("length checked by caller");
    let mut out = sys.l.tmatvec(&lx).expect("length checked by caller");
    for (o, xi) in out.iter_mut().zip(x) {
        *o += beta * xi;
    }
    out
}

fn normal_rhs(sys: &AssembledSystem, beta: f64) -> Vec<f64> {
    let mut rhs = sys.l.tmatvec(&sys.b).expect("b has one entry per row");
    for (r, f) in rhs.iter_mut().zip(&sys.f) {
        *r += beta * f;
    }
    rhs
}

/// Conjugate gradients on the normal equations, started from `F`.
///
/// Convergence is declared once the gradient norm satisfies
/// `|g| <= cg_tol * (1 + |g_0|)`, checked against a freshly computed residual.
/// Reaching the iteration limit returns the last iterate with
/// `converged = false`.
pub fn minimize_cg(sys: &AssembledSystem, cfg: &SolverConfig) -> Result<MinimizeResult> {
    let beta = cfg.beta;
    let n = sys.len();
    let max_iter = cfg.cg_max_iter.unwrap_or(10 * n.max(1));
    let rhs = normal_rhs(sys, beta);
    let true_residual = |u: &[f64]| -> Vec<f64> {
        normal_apply(sys, u, beta)
            .iter()
            .zip(&rhs)
            .map(|(a, b)| b - a)
            .collect()
    };

    let mut u = sys.f.clone();
    let mut r = true_residual(&u);
    // The gradient of J is -2 r.
    let g0 = 2.0 * norm2(&r);
    let target = cfg.cg_tol * (1.0 + g0);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    let mut converged = 2.0 * rr.sqrt() <= target;

    while !converged && iterations < max_iter {
        let ap = normal_apply(sys, &p, beta);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for ((ui, ri), (pi, api)) in u.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *ui += alpha * pi;
            *ri -= alpha * api;
        }
        iterations += 1;
        let rr_next = dot(&r, &r);
        if 2.0 * rr_next.sqrt() <= target {
            // Confirm against the true residual; restart if the recurrence drifted.
            r = true_residual(&u);
            rr = dot(&r, &r);
            if 2.0 * rr.sqrt() <= target {
                converged = true;
            } else {
                p.clone_from(&r);
            }
            continue;
        }
        let gamma = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + gamma * *pi;
        }
        rr = rr_next;
    }

    let final_gradient_norm = 2.0 * norm2(&true_residual(&u));
    let functional_value = eval_functional(sys, &u, beta)?;
    Ok(MinimizeResult {
        u,
        iterations,
        final_gradient_norm,
        functional_value,
        converged,
    })
}

/// Solves the normal equations by dense Gaussian elimination with partial
/// pivoting. Only meant for small systems in tests and diagnostics.
pub fn dense_oracle_solve(sys: &AssembledSystem, beta: f64) -> Result<Vec<f64>> {
    let n = sys.len();
    if n > DENSE_LIMIT {
        return Err(Error::DenseTooLarge {
            n,
            limit: DENSE_LIMIT,
        });
    }
    let l = sys.l.to_dense();
    let mut a = vec![vec![0.0; n]; n];
    for row in &l {
        let nz: Vec<(usize, f64)> = row
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, v)| v != 0.0)
            .collect();
        for &(i, vi) in &nz {
            for &(j, vj) in &nz {
                a[i][j] += vi * vj;
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += beta;
    }
    let mut rhs = vec![0.0; n];
    for (row, &b) in l.iter().zip(&sys.b) {
        for (r, &v) in rhs.iter_mut().zip(row) {
            *r += v * b;
        }
    }
    for (r, f) in rhs.iter_mut().zip(&sys.f) {
        *r += beta * f;
    }
    gauss_solve(a, rhs)
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= scale * 1e-300 {
            return Err(Error::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= factor * y;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Picks the candidate `beta` whose forecasts have the smallest median error
/// on `blocks`. Ties go to the larger `beta`.
pub fn beta_search(blocks: &[DataBlock], betas: &[f64], cfg: &PipelineConfig) -> Result<f64> {
    if blocks.is_empty() {
        return Err(Error::EmptyInput("beta search needs at least one block"));
    }
    if betas.is_empty() {
        return Err(Error::EmptyInput(
            "beta search needs at least one candidate",
        ));
    }
    if let Some(b) = blocks.iter().find(|b| b.ground_truth().is_none()) {
        return Err(Error::MissingGroundTruth(b.option_id.clone()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &beta in betas {
        let mut c = cfg.clone();
        c.solver.beta = beta;
        let report = run_batch(blocks, &c);
        let errs: Vec<f64> = report.forecasts.iter().filter_map(|f| f.err).collect();
        let score = median_lower(&errs).unwrap_or(f64::INFINITY);
        best = match best {
            Some((b, s)) if score > s || (score == s && beta <= b) => Some((b, s)),
            _ => Some((beta, score)),
        };
    }
    Ok(best.expect("at least one candidate").0)
}
