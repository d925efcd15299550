//! `<pair_id>.folds.json` exchange files, so externally trained models can
//! feed the decision stage.

use std::fs;
use std::path::Path;

use super::FoldAccuracies;
use crate::error::{Error, Result};

pub fn save_fold_accuracies(acc: &FoldAccuracies, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(acc).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Read and validate an exchange file. `expected_folds` is the fold count of
/// the active configuration, when there is one.
pub fn load_fold_accuracies(path: &Path, expected_folds: Option<usize>) -> Result<FoldAccuracies> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let acc: FoldAccuracies = serde_json::from_str(&text).map_err(|e| Error::FoldFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    for w in validate(&acc, expected_folds).map_err(|reason| Error::FoldFile {
        path: path.to_path_buf(),
        reason,
    })? {
        log::warn!("{}: {w}", path.display());
    }
    Ok(acc)
}

/// Hard errors as `Err`; soft problems come back as warnings.
pub fn validate(acc: &FoldAccuracies, expected_folds: Option<usize>) -> Result<Vec<String>, String> {
    if acc.max_val_accuracies.len() != acc.folds {
        return Err(format!(
            "declares {} folds but lists {} accuracies",
            acc.folds,
            acc.max_val_accuracies.len()
        ));
    }
    if let Some(f) = expected_folds {
        if acc.folds != f {
            return Err(format!("has {} folds, configuration expects {f}", acc.folds));
        }
    }
    if acc.n_test == 0 {
        return Err("n_test must be positive".into());
    }
    let mut warnings = Vec::new();
    for (i, a) in acc.max_val_accuracies.iter().enumerate() {
        if !(0.0..=1.0).contains(a) {
            return Err(format!("fold {i}: accuracy {a} outside [0, 1]"));
        }
        let k = a * acc.n_test as f64;
        if (k - k.round()).abs() > 1e-6 {
            warnings.push(format!("fold {i}: accuracy {a} is not a multiple of 1/{}", acc.n_test));
        }
    }
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FoldAccuracies {
        FoldAccuracies {
            pair_id: "a__b".into(),
            region_a: "a".into(),
            region_b: "b".into(),
            sample_size: 180,
            n_test: 108,
            folds: 3,
            max_val_accuracies: vec![60.0 / 108.0, 0.5, 1.0],
            producer: "test".into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a__b.folds.json");
        save_fold_accuracies(&sample(), &p).unwrap();
        assert_eq!(load_fold_accuracies(&p, Some(3)).unwrap(), sample());
    }

    #[test]
    fn fold_count_and_range_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.folds.json");

        let mut short = sample();
        short.folds = 26;
        short.max_val_accuracies = vec![0.5; 25];
        save_fold_accuracies(&short, &p).unwrap();
        assert!(matches!(load_fold_accuracies(&p, None), Err(Error::FoldFile { .. })));

        save_fold_accuracies(&sample(), &p).unwrap();
        assert!(load_fold_accuracies(&p, Some(26)).is_err());

        let mut high = sample();
        high.max_val_accuracies[1] = 1.2;
        save_fold_accuracies(&high, &p).unwrap();
        let err = load_fold_accuracies(&p, None).unwrap_err().to_string();
        assert!(err.contains("outside [0, 1]"), "{err}");
    }

    #[test]
    fn off_grid_accuracy_is_only_a_warning() {
        let mut acc = sample();
        acc.max_val_accuracies[0] = 0.6012;
        let w = validate(&acc, None).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn missing_field_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.folds.json");
        fs::write(&p, r#"{"pair_id": "a__b", "region_a": "a"}"#).unwrap();
        let err = load_fold_accuracies(&p, None).unwrap_err().to_string();
        assert!(err.contains("missing field"), "{err}");
    }
}
