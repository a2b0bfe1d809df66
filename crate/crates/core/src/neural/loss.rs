//! Training objectives in double precision, each with its exact gradient.

use super::NeuralError;

/// One ranking target: predicted scores, dense ranks (1 = best) and the
/// success mask. Lower scores mean better predicted rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSample {
    pub p: Vec<f64>,
    pub y: Vec<u32>,
    pub m: Vec<bool>,
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Discount for a pair of ranks: `1 / log2((y_i + y_j)/2 + 2)`.
pub fn pair_weight(yi: u32, yj: u32) -> f64 {
    1.0 / ((f64::from(yi) + f64::from(yj)) / 2.0 + 2.0).log2()
}

fn valid_pairs<'a>(y: &'a [u32], m: &'a [bool]) -> impl Iterator<Item = (usize, usize)> + 'a {
    let n = y.len();
    (0..n)
        .flat_map(move |i| (0..n).map(move |j| (i, j)))
        .filter(move |&(i, j)| i != j && m[i] && m[j] && y[i] < y[j])
}

/// Sum over ordered pairs with both methods successful and `y_i < y_j` of
/// `w_ij ln(1 + e^(p_i - p_j))`.
pub fn rank_loss(p: &[f64], y: &[u32], m: &[bool]) -> f64 {
    valid_pairs(y, m)
        .map(|(i, j)| pair_weight(y[i], y[j]) * softplus(p[i] - p[j]))
        .sum()
}

pub fn rank_loss_grad(p: &[f64], y: &[u32], m: &[bool]) -> Vec<f64> {
    let mut g = vec![0.0; p.len()];
    for (i, j) in valid_pairs(y, m) {
        let d = pair_weight(y[i], y[j]) * sigmoid(p[i] - p[j]);
        g[i] += d;
        g[j] -= d;
    }
    g
}

/// [`rank_loss`] divided by the number of valid pairs (0 when there are none),
/// with its gradient.
pub fn rank_loss_mean(p: &[f64], y: &[u32], m: &[bool]) -> (f64, Vec<f64>) {
    let n = valid_pairs(y, m).count();
    if n == 0 {
        return (0.0, vec![0.0; p.len()]);
    }
    let s = 1.0 / n as f64;
    let g = rank_loss_grad(p, y, m).into_iter().map(|v| v * s).collect();
    (rank_loss(p, y, m) * s, g)
}

/// Mean binary cross-entropy of independent sigmoid outputs.
pub fn bce_multilabel_loss(logits: &[f64], targets: &[f64]) -> f64 {
    let n = logits.len() as f64;
    logits
        .iter()
        .zip(targets)
        .map(|(&z, &t)| softplus(z) - t * z)
        .sum::<f64>()
        / n
}

pub fn bce_multilabel_grad(logits: &[f64], targets: &[f64]) -> Vec<f64> {
    let n = logits.len() as f64;
    logits
        .iter()
        .zip(targets)
        .map(|(&z, &t)| (sigmoid(z) - t) / n)
        .collect()
}

/// Targets with failures replaced by the per-method imputation mean.
pub fn impute(truth: &[Option<f64>], means: &[f64]) -> Vec<f64> {
    truth
        .iter()
        .zip(means)
        .map(|(t, m)| t.unwrap_or(*m))
        .collect()
}

/// Mean squared error over methods against imputed targets.
pub fn regression_loss(pred: &[f64], truth: &[Option<f64>], means: &[f64]) -> f64 {
    let t = impute(truth, means);
    pred.iter()
        .zip(&t)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64
}

pub fn regression_loss_grad(pred: &[f64], truth: &[Option<f64>], means: &[f64]) -> Vec<f64> {
    let t = impute(truth, means);
    let n = pred.len() as f64;
    pred.iter().zip(&t).map(|(p, t)| 2.0 * (p - t) / n).collect()
}

/// Per-method mean of observed sizes. A method never observed falls back to
/// the mean over all observations.
pub fn imputation_means(sizes: &[Vec<Option<u64>>], methods: usize) -> Result<Vec<f64>, NeuralError> {
    let mut sum = vec![0.0; methods];
    let mut cnt = vec![0usize; methods];
    for row in sizes {
        for (k, s) in row.iter().enumerate().take(methods) {
            if let Some(s) = s {
                sum[k] += *s as f64;
                cnt[k] += 1;
            }
        }
    }
    let total: usize = cnt.iter().sum();
    if total == 0 {
        return Err(NeuralError::NoObservedSizes);
    }
    let global = sum.iter().sum::<f64>() / total as f64;
    Ok((0..methods)
        .map(|k| if cnt[k] > 0 { sum[k] / cnt[k] as f64 } else { global })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        let w = pair_weight(1, 2);
        assert!((w - 0.55329).abs() < 1e-5);
        let l = rank_loss(&[0.0, 0.0], &[1, 2], &[true, true]);
        assert!((l - w * 2f64.ln()).abs() < 1e-12);
        assert!((l - 0.38352).abs() < 1e-5);
        assert_eq!(rank_loss(&[0.0, 0.0], &[1, 2], &[true, false]), 0.0);
        let l = rank_loss(&[-2.0, 0.0], &[1, 2], &[true, true]);
        assert!((l - 0.07023).abs() < 1e-5);
        let g = rank_loss_grad(&[0.0, 0.0], &[1, 2], &[true, true]);
        assert!((g[0] - 0.27664).abs() < 1e-5 && (g[1] + 0.27664).abs() < 1e-5);
        let g = rank_loss_grad(&[0.3, 0.1, 0.7], &[1, 2, 1], &[true, true, false]);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn bce_examples() {
        let l = bce_multilabel_loss(&[0.0, 0.0], &[1.0, 0.0]);
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert!(bce_multilabel_loss(&[40.0, -40.0], &[1.0, 0.0]) < 1e-12);
    }

    #[test]
    fn regression_examples() {
        let truth = [Some(10.0), Some(13.0)];
        let means = [0.0, 0.0];
        assert_eq!(regression_loss(&[14.0, 13.0], &truth, &means), 8.0);
        assert_eq!(regression_loss(&[6.0, 13.0], &truth, &means), 8.0);
        assert_eq!(regression_loss(&[10.0, 13.0], &truth, &means), 0.0);
        assert_eq!(regression_loss(&[2.0, 13.0], &[None, Some(13.0)], &[4.0, 0.0]), 2.0);
    }

    #[test]
    fn imputation() {
        let m = imputation_means(&[vec![Some(4), None], vec![Some(6), None]], 2).unwrap();
        assert_eq!(m, [5.0, 5.0]);
        assert_eq!(imputation_means(&[vec![None]], 1), Err(NeuralError::NoObservedSizes));
    }
}
