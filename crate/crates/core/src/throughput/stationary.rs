//! Stationary distributions of finite, sparse discrete-time Markov chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};

/// Row-stochastic transition matrix stored by rows.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Builds the matrix, merging repeated targets and checking that each row
    /// sums to one.
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(domain("transition matrix has no states"));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            row.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            row.retain(|&(_, p)| p != 0.0);
            let mut total = 0.0;
            for &(j, p) in row.iter() {
                if j >= n || !(0.0..=1.0 + 1e-12).contains(&p) {
                    return Err(domain(format!("row {i} has invalid entry ({j}, {p})")));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(domain(format!("row {i} sums to {total}")));
            }
        }
        Ok(TransitionMatrix { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `x P`.
    pub fn left_multiply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += xi * p;
            }
        }
    }

    /// `|| x P - x ||_1`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.left_multiply(x, &mut y);
        y.iter().zip(x).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Every state reaches every other state.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                reverse[j].push(i);
            }
        }
        let reach_all = |next: &dyn Fn(usize, &mut Vec<usize>)| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            let mut buf = Vec::new();
            let mut count = 1;
            while let Some(i) = stack.pop() {
                buf.clear();
                next(i, &mut buf);
                for &j in &buf {
                    if !seen[j] {
                        seen[j] = true;
                        count += 1;
                        stack.push(j);
                    }
                }
            }
            count == n
        };
        reach_all(&|i, out| out.extend(self.rows[i].iter().map(|&(j, _)| j)))
            && reach_all(&|i, out| out.extend_from_slice(&reverse[i]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// LU solve of `pi (P - I) = 0` with one equation replaced by `sum pi = 1`.
    Dense,
    /// Power iteration on the lazy chain `(I + P) / 2`, which has the same
    /// stationary vector and is aperiodic.
    Power,
}

/// Largest chain the dense solver accepts.
pub const DENSE_LIMIT: usize = 3000;

const POWER_TOLERANCE: f64 = 1e-13;
const POWER_MAX_ITERATIONS: usize = 200_000;

pub fn stationary_distribution(matrix: &TransitionMatrix, method: Method) -> Result<Vec<f64>> {
    if !matrix.is_irreducible() {
        return Err(Error::Internal("transition matrix is reducible".into()));
    }
    let pi = match method {
        Method::Dense => dense(matrix)?,
        Method::Power => power(matrix)?,
    };
    if pi.iter().any(|&p| p < -1e-12) {
        return Err(Error::Internal("stationary vector has negative entries".into()));
    }
    Ok(pi)
}

fn dense(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = matrix.len();
    if n > DENSE_LIMIT {
        return Err(domain(format!("{n} states exceed the dense solver limit of {DENSE_LIMIT}")));
    }
    // Column j of A holds the balance equation of state j: sum_i pi_i (P_ij - delta_ij).
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] -= 1.0;
        for &(j, p) in matrix.row(i) {
            a[(j, i)] += p;
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Internal("singular balance equations".into()))?;
    let mut pi: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    normalize(&mut pi);
    Ok(pi)
}

fn power(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = matrix.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for iteration in 0..POWER_MAX_ITERATIONS {
        matrix.left_multiply(&pi, &mut next);
        let mut change = 0.0;
        for (p, q) in pi.iter_mut().zip(&next) {
            let lazy = 0.5 * (*p + q);
            change += (lazy - *p).abs();
            *p = lazy;
        }
        if change < POWER_TOLERANCE {
            normalize(&mut pi);
            log::debug!("power iteration converged after {iteration} steps");
            return Ok(pi);
        }
    }
    Err(Error::Internal(format!(
        "power iteration did not converge in {POWER_MAX_ITERATIONS} steps"
    )))
}

fn normalize(pi: &mut [f64]) {
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state(p: f64, q: f64) -> TransitionMatrix {
        TransitionMatrix::from_rows(vec![vec![(0, 1.0 - p), (1, p)], vec![(0, q), (1, 1.0 - q)]]).unwrap()
    }

    #[test]
    fn two_state_closed_form() {
        let (p, q) = (0.3, 0.05);
        for method in [Method::Dense, Method::Power] {
            let pi = stationary_distribution(&two_state(p, q), method).unwrap();
            assert_relative_eq!(pi[0], q / (p + q), epsilon = 1e-12);
            assert_relative_eq!(pi[1], p / (p + q), epsilon = 1e-12);
        }
    }

    #[test]
    fn periodic_chain_converges_under_power() {
        // Deterministic flip: period 2, stationary (1/2, 1/2).
        let m = two_state(1.0, 1.0);
        let pi = stationary_distribution(&m, Method::Power).unwrap();
        assert_relative_eq!(pi[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reducible_chain_rejected() {
        let m = TransitionMatrix::from_rows(vec![vec![(0, 1.0)], vec![(0, 0.5), (1, 0.5)]]).unwrap();
        assert!(!m.is_irreducible());
        assert!(matches!(stationary_distribution(&m, Method::Dense), Err(Error::Internal(_))));
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(TransitionMatrix::from_rows(vec![vec![(0, 0.5)]]).is_err());
        assert!(TransitionMatrix::from_rows(vec![vec![(3, 1.0)]]).is_err());
        assert!(TransitionMatrix::from_rows(vec![]).is_err());
        // Duplicate targets are merged.
        let m = TransitionMatrix::from_rows(vec![vec![(0, 0.5), (0, 0.5)]]).unwrap();
        assert_eq!(m.row(0), &[(0, 1.0)]);
    }
}
