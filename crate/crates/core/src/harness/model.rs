//! Multinomial logistic regression. Parameters are a `classes × (features + 1)`
//! matrix stored row-major, bias last in each row.

use rand::seq::index;
use rand::Rng;

use super::task::Dataset;
use crate::error::{FortaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Logistic {
    pub classes: usize,
    pub features: usize,
}

impl Logistic {
    pub fn dim(&self) -> usize {
        self.classes * (self.features + 1)
    }

    fn logits(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let stride = self.features + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[c * stride..(c + 1) * stride];
            *o = row[self.features] + row[..self.features].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Softmax probabilities in place; returns log-sum-exp of the logits.
    fn softmax(z: &mut [f64]) -> f64 {
        let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in z.iter_mut() {
            *v = (*v - top).exp();
            total += *v;
        }
        for v in z.iter_mut() {
            *v /= total;
        }
        top + total.ln()
    }

    /// Mean cross-entropy over the given rows.
    pub fn loss_on(&self, w: &[f64], data: &Dataset, rows: &[usize]) -> f64 {
        let mut z = vec![0.0; self.classes];
        let mut total = 0.0;
        for &r in rows {
            self.logits(w, data.row(r), &mut z);
            let label_logit = z[data.y[r]];
            total += Self::softmax(&mut z) - label_logit;
        }
        total / rows.len() as f64
    }

    pub fn loss(&self, w: &[f64], data: &Dataset) -> f64 {
        let rows: Vec<usize> = (0..data.len()).collect();
        self.loss_on(w, data, &rows)
    }

    /// Gradient of the mean cross-entropy over `rows`.
    pub fn gradient_on(&self, w: &[f64], data: &Dataset, rows: &[usize]) -> Vec<f64> {
        let stride = self.features + 1;
        let mut g = vec![0.0; self.dim()];
        let mut p = vec![0.0; self.classes];
        let scale = 1.0 / rows.len() as f64;
        for &r in rows {
            let x = data.row(r);
            self.logits(w, x, &mut p);
            Self::softmax(&mut p);
            p[data.y[r]] -= 1.0;
            for (c, &pc) in p.iter().enumerate() {
                let row = &mut g[c * stride..(c + 1) * stride];
                for (gi, xi) in row[..self.features].iter_mut().zip(x) {
                    *gi += scale * pc * xi;
                }
                row[self.features] += scale * pc;
            }
        }
        g
    }

    pub fn gradient(&self, w: &[f64], data: &Dataset) -> Vec<f64> {
        let rows: Vec<usize> = (0..data.len()).collect();
        self.gradient_on(w, data, &rows)
    }

    pub fn predict(&self, w: &[f64], x: &[f64]) -> usize {
        let mut z = vec![0.0; self.classes];
        self.logits(w, x, &mut z);
        // first maximum wins
        z.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }
}

/// Fraction of correctly classified rows.
pub fn evaluate(model: &Logistic, w: &[f64], test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(FortaError::InsufficientData("empty test set".into()));
    }
    let correct = (0..test.len()).filter(|&r| model.predict(w, test.row(r)) == test.y[r]).count();
    Ok(correct as f64 / test.len() as f64)
}

/// Rows of one uniformly drawn mini-batch, without replacement.
pub fn sample_batch(rng: &mut impl Rng, len: usize, batch_size: usize) -> Vec<usize> {
    if batch_size >= len {
        return (0..len).collect();
    }
    let mut rows = index::sample(rng, len, batch_size).into_vec();
    rows.sort_unstable();
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (Logistic, Dataset, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d = Dataset::new(3);
        for i in 0..40 {
            let row: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            d.push(&row, i % 4);
        }
        let m = Logistic { classes: 4, features: 3 };
        let w: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        (m, d, w)
    }

    #[test]
    fn gradient_matches_closed_form() {
        let (m, d, w) = toy();
        let g = m.gradient(&w, &d);
        // ∂/∂W_c = mean over rows of (p_c − 1[y = c]) · [x, 1]
        let mut want = vec![0.0; m.dim()];
        for r in 0..d.len() {
            let x = d.row(r);
            let z: Vec<f64> = (0..4)
                .map(|c| w[c * 4 + 3] + (0..3).map(|f| w[c * 4 + f] * x[f]).sum::<f64>())
                .collect();
            let norm: f64 = z.iter().map(|v| v.exp()).sum();
            for c in 0..4 {
                let coef = z[c].exp() / norm - if d.y[r] == c { 1.0 } else { 0.0 };
                for f in 0..3 {
                    want[c * 4 + f] += coef * x[f] / 40.0;
                }
                want[c * 4 + 3] += coef / 40.0;
            }
        }
        for (a, b) in g.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (m, d, w) = toy();
        let g = m.gradient(&w, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let dir: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-5;
            let shift = |s: f64| -> Vec<f64> { w.iter().zip(&dir).map(|(a, b)| a + s * b).collect() };
            let fd = (m.loss(&shift(h), &d) - m.loss(&shift(-h), &d)) / (2.0 * h);
            let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
        }
    }

    #[test]
    fn separable_optimum_has_tiny_gradient() {
        let m = Logistic { classes: 2, features: 1 };
        let d = Dataset { features: 1, x: vec![-1.0, 1.0], y: vec![0, 1] };
        let w = vec![-50.0, 0.0, 50.0, 0.0];
        assert!(m.gradient(&w, &d).iter().all(|g| g.abs() < 1e-12));
        assert!(m.loss(&w, &d) < 1e-12);
    }

    #[test]
    fn constant_prediction_accuracy() {
        let m = Logistic { classes: 4, features: 2 };
        let mut d = Dataset::new(2);
        for i in 0..400 {
            d.push(&[i as f64, 1.0], i % 4);
        }
        assert_eq!(evaluate(&m, &vec![0.0; m.dim()], &d).unwrap(), 0.25);
        assert!(evaluate(&m, &vec![0.0; m.dim()], &Dataset::new(2)).is_err());
    }

    #[test]
    fn batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(sample_batch(&mut rng, 5, 10), vec![0, 1, 2, 3, 4]);
        let b = sample_batch(&mut rng, 100, 32);
        assert_eq!(b.len(), 32);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
    }
}
