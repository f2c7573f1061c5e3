//! SMO solver for the C-SVC dual
//!
//! ```text
//! min 1/2 a^T Q a - e^T a   s.t.  y^T a = 0,  0 <= a_i <= C_i,  Q_ij = y_i y_j K_ij
//! ```
//!
//! Working pairs are chosen by maximal violation for `i` and second-order gain
//! for `j`, scanning indices in ascending order so runs are reproducible.

use super::gram::Gram;
use alloc::vec;
use alloc::vec::Vec;

const TAU: f64 = 1e-12;

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// `m(a) - M(a)` at exit; below the tolerance iff converged.
    pub kkt_gap: f64,
    pub converged: bool,
}

pub(crate) fn solve(
    gram: &mut impl Gram,
    y: &[f64],
    c: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Solution {
    let n = y.len();
    debug_assert_eq!(gram.len(), n);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut kkt_gap = f64::INFINITY;
    let mut converged = false;
    let diag: Vec<f64> = (0..n).map(|t| gram.diag(t)).collect();

    while iterations < max_iterations {
        let (pair, gap) = select_working_set(gram, &diag, y, c, &alpha, &grad);
        kkt_gap = gap;
        let Some((i, j)) = pair.filter(|_| gap >= tolerance) else {
            converged = true;
            break;
        };
        iterations += 1;

        let (qd_i, qd_j) = (diag[i], diag[j]);
        let (ki, kj) = gram.rows(i, j);
        let k_ij = ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);

        if y[i] != y[j] {
            let quad = positive(qd_i + qd_j - 2.0 * k_ij);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = positive(qd_i + qd_j - 2.0 * k_ij);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        // grad_k += Q_ki d_i + Q_kj d_j with Q_kl = y_k y_l K_kl
        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for k in 0..n {
            grad[k] += y[k] * (ki[k] * di + kj[k] * dj);
        }
    }

    let rho = compute_rho(y, c, &alpha, &grad);
    Solution {
        alpha,
        rho,
        iterations,
        kkt_gap,
        converged,
    }
}

#[inline]
fn positive(quad: f64) -> f64 {
    if quad > 0.0 {
        quad
    } else {
        TAU
    }
}

#[inline]
fn in_up(y: f64, a: f64, c: f64) -> bool {
    if y > 0.0 {
        a < c
    } else {
        a > 0.0
    }
}

#[inline]
fn in_low(y: f64, a: f64, c: f64) -> bool {
    if y > 0.0 {
        a > 0.0
    } else {
        a < c
    }
}

/// Returns the working pair (if any) and the current KKT gap `m(a) - M(a)`.
fn select_working_set(
    gram: &mut impl Gram,
    diag: &[f64],
    y: &[f64],
    c: &[f64],
    alpha: &[f64],
    grad: &[f64],
) -> (Option<(usize, usize)>, f64) {
    let n = y.len();
    let mut g_max = f64::NEG_INFINITY;
    let mut i_best = None;
    for t in 0..n {
        if in_up(y[t], alpha[t], c[t]) {
            let v = -y[t] * grad[t];
            if v >= g_max {
                g_max = v;
                i_best = Some(t);
            }
        }
    }
    let Some(i) = i_best else {
        return (None, 0.0);
    };

    let qd_i = diag[i];
    let ki = gram.row(i);
    let mut g_min = f64::INFINITY;
    let mut j_best = None;
    let mut obj_min = f64::INFINITY;
    for t in 0..n {
        if !in_low(y[t], alpha[t], c[t]) {
            continue;
        }
        let v = -y[t] * grad[t];
        g_min = g_min.min(v);
        let grad_diff = g_max - v;
        if grad_diff > 0.0 {
            let quad = positive(qd_i + diag[t] - 2.0 * ki[t]);
            let obj = -(grad_diff * grad_diff) / quad;
            if obj <= obj_min {
                obj_min = obj;
                j_best = Some(t);
            }
        }
    }
    let gap = if g_min.is_finite() {
        g_max - g_min
    } else {
        0.0
    };
    (j_best.map(|j| (i, j)), gap)
}

fn compute_rho(y: &[f64], c: &[f64], alpha: &[f64], grad: &[f64]) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    }
}
