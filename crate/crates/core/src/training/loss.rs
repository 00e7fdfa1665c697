//! Losses over score vectors. Each returns the loss together with its
//! gradient with respect to the scores it was given.

use crate::error::{Error, Result};
use crate::metrics::QualityOrdering;

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z.iter().copied());
    z.iter().map(|v| (v - lse).exp()).collect()
}

/// `-log(e^pos / (e^pos + Σ e^neg))`. `grad[0]` is for `pos_sim`, `grad[1 + i]`
/// for `neg_sims[i]`.
pub fn contrastive_loss(pos_sim: f64, neg_sims: &[f64]) -> LossGrad {
    if neg_sims.is_empty() {
        return LossGrad {
            loss: 0.0,
            grad: vec![0.0],
        };
    }
    let all = std::iter::once(pos_sim).chain(neg_sims.iter().copied());
    let lse = log_sum_exp(all.clone());
    let mut grad: Vec<f64> = all.map(|s| (s - lse).exp()).collect();
    grad[0] -= 1.0;
    LossGrad {
        loss: lse - pos_sim,
        grad,
    }
}

/// Plackett-Luce negative log-likelihood of `order` (best first) under
/// scores `z`.
pub fn list_mle_loss(z: &[f64], order: &[usize]) -> Result<LossGrad> {
    if z.len() != order.len() {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: order.len(),
        });
    }
    let n = z.len();
    if n == 0 {
        return Err(Error::invalid("empty score list"));
    }
    let mut seen = vec![false; n];
    for &o in order {
        if o >= n || std::mem::replace(&mut seen[o], true) {
            return Err(Error::invalid("ordering is not a permutation"));
        }
    }

    // suffix_lse[k] = log Σ_{i≥k} exp(z[order[i]])
    let mut suffix_lse = vec![f64::NEG_INFINITY; n];
    let mut acc = f64::NEG_INFINITY;
    for k in (0..n).rev() {
        let v = z[order[k]];
        acc = if acc == f64::NEG_INFINITY {
            v
        } else {
            let m = acc.max(v);
            m + ((acc - m).exp() + (v - m).exp()).ln()
        };
        suffix_lse[k] = acc;
    }

    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for (m, &item) in order.iter().enumerate() {
        loss += suffix_lse[m] - z[item];
        let mut g = -1.0;
        for lse in &suffix_lse[..=m] {
            g += (z[item] - lse).exp();
        }
        grad[item] = g;
    }
    Ok(LossGrad { loss, grad })
}

pub fn list_mle_loss_ordering(z: &[f64], ordering: &QualityOrdering) -> Result<LossGrad> {
    list_mle_loss(z, ordering.order())
}

/// `KL(softmax(teacher) ‖ softmax(student))`; gradient is w.r.t. the student.
pub fn kl_distill_loss(teacher: &[f64], student: &[f64]) -> Result<LossGrad> {
    if teacher.len() != student.len() {
        return Err(Error::LengthMismatch {
            left: teacher.len(),
            right: student.len(),
        });
    }
    if teacher.is_empty() {
        return Err(Error::invalid("empty score list"));
    }
    let t_lse = log_sum_exp(teacher.iter().copied());
    let s_lse = log_sum_exp(student.iter().copied());
    let p = softmax(teacher);
    let q = softmax(student);
    let mut loss = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            loss += p[i] * ((teacher[i] - t_lse) - (student[i] - s_lse));
        }
    }
    let grad = q.iter().zip(&p).map(|(q, p)| q - p).collect();
    Ok(LossGrad {
        loss: loss.max(0.0),
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contrastive_cases() {
        assert_abs_diff_eq!(contrastive_loss(0.3, &[0.3, 0.3, 0.3]).loss, 4f64.ln(), epsilon = 1e-12);
        assert_eq!(contrastive_loss(1.0, &[]).loss, 0.0);
        assert_abs_diff_eq!(contrastive_loss(10.0, &[0.0]).loss, 4.539889921686465e-5, epsilon = 1e-15);
        // stable for large scores
        let big = contrastive_loss(1000.0, &[999.0]);
        assert!(big.loss.is_finite());
        assert_abs_diff_eq!(big.loss, (1.0 + (-1.0f64).exp()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn list_mle_cases() {
        let l = list_mle_loss(&[2.0, 1.0, 0.0], &[0, 1, 2]).unwrap();
        assert_abs_diff_eq!(l.loss, 0.7208676519626029, epsilon = 1e-12);
        assert_eq!(list_mle_loss(&[3.0], &[0]).unwrap().loss, 0.0);
        assert_eq!(list_mle_loss(&[3.0], &[0]).unwrap().grad, vec![0.0]);
        for order in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            assert_abs_diff_eq!(list_mle_loss(&[0.5; 3], &order).unwrap().loss, 6f64.ln(), epsilon = 1e-12);
        }
        assert!(list_mle_loss(&[1.0, 2.0], &[0]).is_err());
        assert!(list_mle_loss(&[1.0, 2.0], &[0, 0]).is_err());
    }

    #[test]
    fn kl_cases() {
        assert_abs_diff_eq!(kl_distill_loss(&[1.0, -2.0, 0.5], &[1.0, -2.0, 0.5]).unwrap().loss, 0.0, epsilon = 1e-15);
        let l = kl_distill_loss(&[2f64.ln(), 0.0], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(l.loss, 0.056633012265132426, epsilon = 1e-12);
        assert_abs_diff_eq!(l.grad[0], 0.5 - 2.0 / 3.0, epsilon = 1e-15);
        assert!(kl_distill_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn finite_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
        let h = 1e-4;
        (0..x.len())
            .map(|i| {
                let mut up = x.to_vec();
                let mut down = x.to_vec();
                up[i] += h;
                down[i] -= h;
                (f(&up) - f(&down)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            0.0
        } else {
            diff / norm
        }
    }

    #[test]
    fn score_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let n = rng.gen_range(2..12);
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }

            let c = contrastive_loss(z[0], &z[1..]);
            let fd = finite_diff(|x| contrastive_loss(x[0], &x[1..]).loss, &z);
            assert!(rel_err(&c.grad, &fd) < 1e-6);

            let l = list_mle_loss(&z, &order).unwrap();
            let fd = finite_diff(|x| list_mle_loss(x, &order).unwrap().loss, &z);
            assert!(rel_err(&l.grad, &fd) < 1e-6);

            let k = kl_distill_loss(&t, &z).unwrap();
            let fd = finite_diff(|x| kl_distill_loss(&t, x).unwrap().loss, &z);
            assert!(rel_err(&k.grad, &fd) < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn losses_nonnegative_and_shift_invariant(
            z in proptest::collection::vec(-20.0f64..20.0, 1..15),
            t in proptest::collection::vec(-20.0f64..20.0, 15),
            shift in -50.0f64..50.0,
        ) {
            let n = z.len();
            let order: Vec<usize> = (0..n).rev().collect();
            let l = list_mle_loss(&z, &order).unwrap().loss;
            prop_assert!(l >= 0.0);
            let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
            let ls = list_mle_loss(&shifted, &order).unwrap().loss;
            prop_assert!((l - ls).abs() <= 1e-9 * (1.0 + l.abs()));

            prop_assert!(contrastive_loss(z[0], &z[1..]).loss >= 0.0);

            let t = &t[..n];
            let k = kl_distill_loss(t, &z).unwrap().loss;
            prop_assert!(k >= 0.0);
            let ks = kl_distill_loss(t, &shifted).unwrap().loss;
            prop_assert!((k - ks).abs() <= 1e-9 * (1.0 + k));
            prop_assert!(kl_distill_loss(&z, &shifted).unwrap().loss < 1e-9);
        }
    }
}
