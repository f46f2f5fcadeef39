//! Dice similarity coefficient: 2|X ∩ Y| / (|X| + |Y|).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::LabelMap;

/// Binary-mask Dice. Conventions for degenerate masks: both empty -> 1.0,
/// exactly one empty -> 0.0.
pub fn dice(pred: &[bool], reference: &[bool]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::Shape {
            expected: format!("{} pixels", reference.len()),
            got: format!("{}", pred.len()),
        });
    }
    let mut overlap = 0usize;
    let mut np = 0usize;
    let mut nr = 0usize;
    for (p, r) in pred.iter().zip(reference) {
        np += *p as usize;
        nr += *r as usize;
        overlap += (*p && *r) as usize;
    }
    if np + nr == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap as f64 / (np + nr) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceResult {
    pub id: String,
    /// one entry per class, including background at index 0
    pub per_class: Vec<f64>,
    /// mean over foreground classes 1..C
    pub mean_foreground: f64,
}

pub fn dice_multiclass(id: &str, pred: &LabelMap, reference: &LabelMap) -> Result<DiceResult> {
    if pred.height != reference.height
        || pred.width != reference.width
        || pred.classes != reference.classes
    {
        return Err(Error::Shape {
            expected: format!(
                "{}x{} with {} classes",
                reference.height, reference.width, reference.classes
            ),
            got: format!("{}x{} with {} classes", pred.height, pred.width, pred.classes),
        });
    }
    let classes = reference.classes;
    let mut per_class = Vec::with_capacity(classes);
    for c in 0..classes {
        let pm: Vec<bool> = pred.data.iter().map(|v| *v as usize == c).collect();
        let rm: Vec<bool> = reference.data.iter().map(|v| *v as usize == c).collect();
        per_class.push(dice(&pm, &rm)?);
    }
    let mean_foreground = per_class[1..].iter().sum::<f64>() / (classes - 1) as f64;
    Ok(DiceResult { id: id.into(), per_class, mean_foreground })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_masks_score_one() {
        let m = vec![true, false, true, true];
        assert_eq!(dice(&m, &m).unwrap(), 1.0);
    }

    #[test]
    fn half_overlap() {
        // pred 4 px, ref 4 px, overlap 2 -> 2*2/8
        let pred = vec![true, true, true, true, false, false];
        let refm = vec![true, true, false, false, true, true];
        assert_eq!(dice(&pred, &refm).unwrap(), 0.5);
    }

    #[test]
    fn empty_mask_conventions() {
        let empty = vec![false; 4];
        let full = vec![true; 4];
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice(&empty, &full).unwrap(), 0.0);
        assert_eq!(dice(&full, &empty).unwrap(), 0.0);
    }

    #[test]
    fn dice_is_symmetric() {
        let mut rng = crate::rng::rng_from(4);
        for _ in 0..100 {
            let a: Vec<bool> = (0..32).map(|_| rng.random()).collect();
            let b: Vec<bool> = (0..32).map(|_| rng.random()).collect();
            assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
        }
    }

    #[test]
    fn multiclass_worked_example() {
        // pred [[1,1],[0,2]], ref [[1,0],[0,2]]
        let pred = LabelMap { height: 2, width: 2, classes: 3, data: vec![1, 1, 0, 2] };
        let refm = LabelMap { height: 2, width: 2, classes: 3, data: vec![1, 0, 0, 2] };
        let r = dice_multiclass("t", &pred, &refm).unwrap();
        assert!((r.per_class[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.per_class[2], 1.0);
        assert!((r.mean_foreground - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn multiclass_matches_naive_counting_oracle() {
        let mut rng = crate::rng::rng_from(9);
        for _ in 0..200 {
            let classes = 4usize;
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| LabelMap {
                height: 4,
                width: 5,
                classes,
                data: (0..20).map(|_| rng.random_range(0..classes) as u8).collect(),
            };
            let (pred, refm) = (mk(&mut rng), mk(&mut rng));
            let r = dice_multiclass("t", &pred, &refm).unwrap();
            for c in 0..classes {
                let np = pred.data.iter().filter(|v| **v as usize == c).count();
                let nr = refm.data.iter().filter(|v| **v as usize == c).count();
                let ov = pred
                    .data
                    .iter()
                    .zip(&refm.data)
                    .filter(|(p, r)| **p as usize == c && **r as usize == c)
                    .count();
                let expect = if np + nr == 0 { 1.0 } else { 2.0 * ov as f64 / (np + nr) as f64 };
                assert_eq!(r.per_class[c], expect);
            }
        }
    }

    #[test]
    fn permuting_pixels_consistently_preserves_scores() {
        let pred = LabelMap { height: 2, width: 2, classes: 3, data: vec![1, 1, 0, 2] };
        let refm = LabelMap { height: 2, width: 2, classes: 3, data: vec![1, 0, 0, 2] };
        let perm = [2usize, 0, 3, 1];
        let apply = |m: &LabelMap| LabelMap {
            data: perm.iter().map(|&i| m.data[i]).collect(),
            ..m.clone()
        };
        let a = dice_multiclass("t", &pred, &refm).unwrap();
        let b = dice_multiclass("t", &apply(&pred), &apply(&refm)).unwrap();
        assert_eq!(a.per_class, b.per_class);
    }
}
