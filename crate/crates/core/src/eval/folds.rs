use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Seeded fold ids in `0..k`, balanced within each label class.
pub fn stratified_folds(y: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > y.len() {
        return Err(Error::InvalidParameter(format!("{k} folds for {} observations", y.len())));
    }
    let mut r = rng::stream(seed, "folds", 0);
    let mut folds = vec![0; y.len()];
    let mut next = 0;
    for class in [0.0, 1.0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| (y[i] >= 0.5) == (class >= 0.5)).collect();
        idx.shuffle(&mut r);
        for i in idx {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

/// `(train, test)` index lists for fold `f`.
pub fn split(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_deterministic() {
        let y: Vec<f64> = (0..103).map(|i| f64::from(u8::from(i % 4 == 0))).collect();
        let f = stratified_folds(&y, 5, 3).unwrap();
        assert_eq!(f, stratified_folds(&y, 5, 3).unwrap());
        assert_ne!(f, stratified_folds(&y, 5, 4).unwrap());
        for k in 0..5 {
            let pos = (0..y.len()).filter(|&i| f[i] == k && y[i] == 1.0).count();
            let all = f.iter().filter(|&&v| v == k).count();
            assert!((5..=6).contains(&pos), "{pos}");
            assert!((20..=21).contains(&all));
        }
    }

    #[test]
    fn leave_one_out_and_bad_k() {
        let y = [0.0, 1.0, 1.0, 0.0];
        let mut f = stratified_folds(&y, 4, 1).unwrap();
        f.sort();
        assert_eq!(f, vec![0, 1, 2, 3]);
        assert!(stratified_folds(&y, 5, 1).is_err());
        assert!(stratified_folds(&y, 1, 1).is_err());
    }
}
