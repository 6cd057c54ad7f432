//! Weighted logistic regression fitted with batch gradient descent and
//! backtracking line search. Dependency-free and deterministic.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

const GRAD_TOL: f64 = 1e-6;
const ARMIJO_C: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Per-column standardization fitted on the training matrix.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub coef: Vec<f64>,
    pub intercept: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(-m)) computed stably.
fn log1p_exp_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// Fit on standardized features with weights normalized to unit mass, so the
/// solution is invariant to rescaling all weights by a positive constant.
pub fn fit(
    x: &Matrix,
    targets: &[f64],
    weights: &[f64],
    l2_reg: f64,
    max_iterations: usize,
) -> LogisticModel {
    let n = x.rows();
    let d = x.cols();
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for c in 0..d {
        let mut s = 0.0;
        for r in 0..n {
            s += x.get(r, c);
        }
        means[c] = s / n as f64;
        let mut sq = 0.0;
        for r in 0..n {
            let dv = x.get(r, c) - means[c];
            sq += dv * dv;
        }
        let sd = (sq / n as f64).sqrt();
        stds[c] = if sd < 1e-12 { 1.0 } else { sd };
    }

    let total_w: f64 = weights.iter().sum();
    let wn: Vec<f64> = weights.iter().map(|w| w / total_w).collect();

    let std_row = |r: usize, c: usize| (x.get(r, c) - means[c]) / stds[c];

    let objective = |coef: &[f64], intercept: f64| -> f64 {
        let mut loss = 0.0;
        for r in 0..n {
            if wn[r] == 0.0 {
                continue;
            }
            let mut z = intercept;
            for c in 0..d {
                z += coef[c] * std_row(r, c);
            }
            let m = (2.0 * targets[r] - 1.0) * z;
            loss += wn[r] * log1p_exp_neg(m);
        }
        let pen: f64 = coef.iter().map(|b| b * b).sum();
        loss + 0.5 * l2_reg * pen
    };

    let mut coef = vec![0.0; d];
    let mut intercept = 0.0;
    let mut step = 1.0;
    let mut f_cur = objective(&coef, intercept);
    for _ in 0..max_iterations {
        let mut g_coef = vec![0.0; d];
        let mut g_int = 0.0;
        for r in 0..n {
            if wn[r] == 0.0 {
                continue;
            }
            let mut z = intercept;
            for c in 0..d {
                z += coef[c] * std_row(r, c);
            }
            let err = wn[r] * (sigmoid(z) - targets[r]);
            g_int += err;
            for c in 0..d {
                g_coef[c] += err * std_row(r, c);
            }
        }
        for c in 0..d {
            g_coef[c] += l2_reg * coef[c];
        }
        let g_norm_sq: f64 = g_coef.iter().map(|g| g * g).sum::<f64>() + g_int * g_int;
        if g_norm_sq.sqrt() < GRAD_TOL {
            break;
        }
        // Backtracking line search along the negative gradient.
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let cand_coef: Vec<f64> = coef
                .iter()
                .zip(&g_coef)
                .map(|(b, g)| b - t * g)
                .collect();
            let cand_int = intercept - t * g_int;
            let f_new = objective(&cand_coef, cand_int);
            if f_new <= f_cur - ARMIJO_C * t * g_norm_sq {
                coef = cand_coef;
                intercept = cand_int;
                f_cur = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (t * 2.0).min(1e6);
    }

    LogisticModel {
        means,
        stds,
        coef,
        intercept,
    }
}

impl LogisticModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut z = self.intercept;
        for (c, v) in row.iter().enumerate() {
            z += self.coef[c] * (v - self.means[c]) / self.stds[c];
        }
        sigmoid(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_points_reach_full_accuracy() {
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.2, 0.1],
            vec![1.0, 1.0],
            vec![0.9, 1.1],
        ]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let w = [1.0; 4];
        let m = fit(&x, &y, &w, 1e-6, 2000);
        for r in 0..4 {
            let s = m.score_row(x.row(r));
            assert_eq!(u8::from(s >= 0.5), y[r] as u8, "row {r} score {s}");
        }
    }

    #[test]
    fn weight_rescaling_is_invariant() {
        let x = Matrix::from_rows(&[
            vec![0.1, 1.0],
            vec![0.4, 0.2],
            vec![0.9, 0.8],
            vec![0.3, 0.9],
            vec![0.7, 0.1],
        ]);
        let y = [0.0, 0.0, 1.0, 1.0, 1.0];
        let w1 = [0.5, 1.0, 2.0, 1.0, 0.7];
        let w2: Vec<f64> = w1.iter().map(|w| w * 2.5).collect();
        let m1 = fit(&x, &y, &w1, 0.01, 500);
        let m2 = fit(&x, &y, &w2, 0.01, 500);
        for (a, b) in m1.coef.iter().zip(&m2.coef) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((m1.intercept - m2.intercept).abs() < 1e-9);
    }
}
