//! Fold harness: bootstrap-resample two regions, train a discriminator, and
//! record the best validation accuracy per fold.

mod classifier;
mod exchange;
mod features;

pub use classifier::{LinearClassifier, Samples, Standardizer};
pub use exchange::{load_fold_accuracies, save_fold_accuracies};
pub use features::{feature_layout, feature_len, FeatureBank, FourierFeatures, CENTRAL_BAND};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heightmap::{random_orientation, Orientation, PatchSet};
use crate::par::Exec;
use crate::seed::SeedKey;

pub const BUILTIN_PRODUCER: &str = "builtin-fourier-linear";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldConfig {
    pub folds: usize,
    pub epochs: usize,
    pub val_fraction: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub base_seed: u64,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig {
            folds: 26,
            epochs: 25,
            val_fraction: 0.30,
            batch_size: 32,
            learning_rate: 0.01,
            base_seed: 0,
        }
    }
}

impl FoldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::OutOfRange("folds, epochs and batch_size must be >= 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::OutOfRange(format!(
                "val_fraction {} not in (0, 1)",
                self.val_fraction
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::OutOfRange("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Validation items per region and per fold.
    pub fn val_per_region(&self, sample_size: usize) -> Result<usize> {
        let v = (self.val_fraction * sample_size as f64).round() as usize;
        if v == 0 {
            return Err(Error::EmptySplit {
                sample_size,
                val_fraction: self.val_fraction,
                which: "validation",
            });
        }
        if v >= sample_size {
            return Err(Error::EmptySplit {
                sample_size,
                val_fraction: self.val_fraction,
                which: "training",
            });
        }
        Ok(v)
    }

    pub fn n_test(&self, sample_size: usize) -> Result<usize> {
        Ok(2 * self.val_per_region(sample_size)?)
    }
}

/// Per-fold maximum validation accuracies for one region pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAccuracies {
    pub pair_id: String,
    pub region_a: String,
    pub region_b: String,
    pub sample_size: usize,
    pub n_test: usize,
    pub folds: usize,
    pub max_val_accuracies: Vec<f64>,
    pub producer: String,
}

impl FoldAccuracies {
    pub fn mean(&self) -> f64 {
        crate::numeric::mean(&self.max_val_accuracies)
    }

    pub fn max(&self) -> f64 {
        self.max_val_accuracies
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Canonical identifier of an unordered region pair.
pub fn pair_id(a: &str, b: &str) -> String {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    format!("{lo}__{hi}")
}

pub fn run_folds(a: &PatchSet, b: &PatchSet, cfg: &FoldConfig) -> Result<FoldAccuracies> {
    let fa = FeatureBank::build(a, Exec::Sequential)?;
    let fb = FeatureBank::build(b, Exec::Sequential)?;
    run_folds_with_banks(&fa, &fb, cfg)
}

/// Fold loop over precomputed feature banks. Single-threaded and a pure
/// function of the banks, `cfg` and the pair id.
pub fn run_folds_with_banks(a: &FeatureBank, b: &FeatureBank, cfg: &FoldConfig) -> Result<FoldAccuracies> {
    cfg.validate()?;
    // canonical order, so (a, b) and (b, a) give identical results
    let (a, b) = if a.region_id <= b.region_id { (a, b) } else { (b, a) };
    if a.dim != b.dim {
        return Err(Error::Invalid(format!(
            "feature dimension mismatch: {} has {}, {} has {}",
            a.region_id, a.dim, b.region_id, b.dim
        )));
    }
    let sample_size = a.n_patches.min(b.n_patches);
    let n_val = cfg.val_per_region(sample_size)?;
    let n_train = sample_size - n_val;
    let n_test = 2 * n_val;
    let id = pair_id(&a.region_id, &b.region_id);
    let key = SeedKey::new(cfg.base_seed).str(&id);

    let mut accuracies = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        let mut rng = key.int(fold as u64).rng();
        // bootstrap draws (patch, fresh orientation), then split per region
        let mut draws: [Vec<(usize, Orientation)>; 2] = [Vec::new(), Vec::new()];
        for (bank, d) in [a, b].iter().zip(draws.iter_mut()) {
            *d = (0..sample_size)
                .map(|_| {
                    let p = rand::Rng::random_range(&mut rng, 0..bank.n_patches);
                    (p, random_orientation(&mut rng))
                })
                .collect();
        }
        let mut train = Samples::with_capacity(a.dim, 2 * n_train);
        let mut val = Samples::with_capacity(a.dim, n_test);
        for (label, (bank, d)) in [a, b].iter().zip(&draws).enumerate() {
            for (i, &(p, o)) in d.iter().enumerate() {
                let target = if i < n_val { &mut val } else { &mut train };
                target.push(bank.get(p, o), label as u8);
            }
        }
        let st = Standardizer::fit(&train);
        st.apply(&mut train);
        st.apply(&mut val);

        let mut model = LinearClassifier::new(a.dim, cfg.learning_rate as f32);
        let mut best = 0usize;
        for _ in 0..cfg.epochs {
            model.train_epoch(&train, cfg.batch_size, &mut rng);
            best = best.max(model.correct(&val));
        }
        accuracies.push(best as f64 / n_test as f64);
    }

    Ok(FoldAccuracies {
        pair_id: id,
        region_a: a.region_id.clone(),
        region_b: b.region_id.clone(),
        sample_size,
        n_test,
        folds: cfg.folds,
        max_val_accuracies: accuracies,
        producer: BUILTIN_PRODUCER.into(),
    })
}
