use rand::seq::SliceRandom;
use rand::Rng;

/// Row-major sample matrix with 0/1 labels.
#[derive(Debug, Clone)]
pub struct Samples {
    pub dim: usize,
    pub x: Vec<f32>,
    pub y: Vec<u8>,
}

impl Samples {
    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Samples {
            dim,
            x: Vec::with_capacity(dim * rows),
            y: Vec::with_capacity(rows),
        }
    }

    pub fn push(&mut self, row: &[f32], label: u8) {
        debug_assert_eq!(row.len(), self.dim);
        self.x.extend_from_slice(row);
        self.y.push(label);
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-feature centering and scaling fitted on a training set.
///
/// After z-scoring, rows are divided by `sqrt(dim)` so a typical sample has
/// unit norm and the step size does not depend on the patch size.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Vec<f32>,
    inv_scale: Vec<f32>,
}

impl Standardizer {
    pub fn fit(s: &Samples) -> Self {
        let n = s.len() as f64;
        let mut mean = vec![0.0f64; s.dim];
        for i in 0..s.len() {
            for (m, v) in mean.iter_mut().zip(s.row(i)) {
                *m += f64::from(*v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; s.dim];
        for i in 0..s.len() {
            for ((acc, v), m) in var.iter_mut().zip(s.row(i)).zip(&mean) {
                let d = f64::from(*v) - m;
                *acc += d * d;
            }
        }
        let norm = (s.dim as f64).sqrt();
        let inv_scale = var
            .iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    (1.0 / (sd * norm)) as f32
                } else {
                    0.0
                }
            })
            .collect();
        Standardizer {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            inv_scale,
        }
    }

    pub fn apply(&self, s: &mut Samples) {
        for row in s.x.chunks_exact_mut(s.dim) {
            for ((v, m), k) in row.iter_mut().zip(&self.mean).zip(&self.inv_scale) {
                *v = (*v - m) * k;
            }
        }
    }
}

/// Two-class linear model trained by plain mini-batch SGD on the logistic
/// (two-class cross-entropy) loss.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    pub weights: Vec<f32>,
    pub bias: f32,
    pub learning_rate: f32,
}

impl LinearClassifier {
    pub fn new(dim: usize, learning_rate: f32) -> Self {
        LinearClassifier {
            weights: vec![0.0; dim],
            bias: 0.0,
            learning_rate,
        }
    }

    #[inline]
    pub fn logit(&self, row: &[f32]) -> f32 {
        let mut acc = 0.0f32;
        for (w, x) in self.weights.iter().zip(row) {
            acc += w * x;
        }
        acc + self.bias
    }

    pub fn predict(&self, row: &[f32]) -> u8 {
        u8::from(self.logit(row) > 0.0)
    }

    /// One pass over `train` in shuffled order.
    pub fn train_epoch<R: Rng>(&mut self, train: &Samples, batch_size: usize, rng: &mut R) {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(rng);
        let mut grad = vec![0.0f32; self.weights.len()];
        for batch in order.chunks(batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0f32;
            for &i in batch {
                let row = train.row(i);
                let p = sigmoid(self.logit(row));
                let err = p - f32::from(train.y[i]);
                for (g, x) in grad.iter_mut().zip(row) {
                    *g += err * x;
                }
                grad_b += err;
            }
            let step = self.learning_rate / batch.len() as f32;
            for (w, g) in self.weights.iter_mut().zip(&grad) {
                *w -= step * g;
            }
            self.bias -= step * grad_b;
        }
    }

    /// Number of correctly classified rows.
    pub fn correct(&self, s: &Samples) -> usize {
        (0..s.len()).filter(|&i| self.predict(s.row(i)) == s.y[i]).count()
    }
}

fn sigmoid(z: f32) -> f32 {
    1.0 / (1.0 + (-z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, dim: usize, shift: f32, seed: u64) -> Samples {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, 1.0).unwrap();
        let mut s = Samples::with_capacity(dim, 2 * n);
        for label in [0u8, 1] {
            for _ in 0..n {
                let row: Vec<f32> = (0..dim)
                    .map(|_| noise.sample(&mut rng) + if label == 1 { shift } else { 0.0 })
                    .collect();
                s.push(&row, label);
            }
        }
        s
    }

    #[test]
    fn separable_blobs_are_learned() {
        let mut train = blobs(60, 50, 1.0, 1);
        let mut test = blobs(40, 50, 1.0, 2);
        let st = Standardizer::fit(&train);
        st.apply(&mut train);
        st.apply(&mut test);
        let mut model = LinearClassifier::new(50, 0.01);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            model.train_epoch(&train, 32, &mut rng);
        }
        assert!(model.correct(&test) as f64 / test.len() as f64 > 0.95);
    }

    #[test]
    fn identical_classes_stay_near_chance() {
        let mut train = blobs(100, 20, 0.0, 4);
        let mut test = blobs(500, 20, 0.0, 5);
        let st = Standardizer::fit(&train);
        st.apply(&mut train);
        st.apply(&mut test);
        let mut model = LinearClassifier::new(20, 0.01);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..25 {
            model.train_epoch(&train, 32, &mut rng);
        }
        let acc = model.correct(&test) as f64 / test.len() as f64;
        assert!((acc - 0.5).abs() < 0.08, "{acc}");
    }

    #[test]
    fn standardizer_zero_variance_feature_is_dropped() {
        let mut s = Samples::with_capacity(2, 3);
        s.push(&[1.0, 5.0], 0);
        s.push(&[2.0, 5.0], 1);
        s.push(&[3.0, 5.0], 0);
        let st = Standardizer::fit(&s);
        st.apply(&mut s);
        assert!(s.x.iter().skip(1).step_by(2).all(|v| *v == 0.0));
        let col0: f32 = (0..3).map(|i| s.row(i)[0]).sum();
        assert!(col0.abs() < 1e-6);
    }
}
