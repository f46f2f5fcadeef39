//! Dataset assembly: disjointly-seeded unpaired splits, with target-modality
//! training labels sequestered behind an access-counting guard.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::phantom::{sample_anatomy, AnatomyConfig};
use crate::data::style::{render_modality, ModalityStyle};
use crate::error::{Error, Result};
use crate::rng::{derive_seed_indexed, permutation, rng_from};
use crate::types::{Image, LabelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub anatomy: AnatomyConfig,
    pub style_a: ModalityStyle,
    pub style_b: ModalityStyle,
    pub a_train: usize,
    pub a_val: usize,
    pub b_train: usize,
    pub b_val: usize,
    pub b_test: usize,
    pub seed: u64,
}

impl DataConfig {
    /// Desk preset: 60 labeled A-train images and 19 held-out B-test images,
    /// mirroring the cohort sizes; B-val is carved out for model selection.
    pub fn desk() -> Self {
        DataConfig {
            anatomy: AnatomyConfig::desk(),
            style_a: ModalityStyle::a_like(),
            style_b: ModalityStyle::b_like(),
            a_train: 60,
            a_val: 8,
            b_train: 60,
            b_val: 8,
            b_test: 19,
            seed: 7,
        }
    }

    pub fn paper_parity() -> Self {
        DataConfig { anatomy: AnatomyConfig::paper_parity(), ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        self.anatomy.validate()?;
        self.style_a.validate()?;
        self.style_b.validate()?;
        for (name, n) in [
            ("a_train", self.a_train),
            ("a_val", self.a_val),
            ("b_train", self.b_train),
            ("b_val", self.b_val),
            ("b_test", self.b_test),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("split {name} must have count >= 1")));
            }
        }
        Ok(())
    }
}

/// Unlabeled-by-contract split: labels exist (synthetic ground truth) but
/// every read is counted, so training entry points can prove they never
/// looked.
#[derive(Debug, Clone)]
pub struct SequesteredSplit {
    images: Vec<Image>,
    labels: Vec<LabelMap>,
    reads: Arc<AtomicU64>,
}

impl SequesteredSplit {
    pub fn new(images: Vec<Image>, labels: Vec<LabelMap>) -> Self {
        assert_eq!(images.len(), labels.len());
        SequesteredSplit { images, labels, reads: Arc::new(AtomicU64::new(0)) }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    /// Counted access; evaluation code only.
    pub fn read_label(&self, index: usize) -> &LabelMap {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.labels[index]
    }

    pub fn label_reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    /// Uncounted access for persistence only — the on-disk dataset stores the
    /// ground truth; the guard protects the in-memory training path.
    pub(crate) fn raw_labels(&self) -> &[LabelMap] {
        &self.labels
    }
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub config: DataConfig,
    pub a_train: Vec<(Image, LabelMap)>,
    pub a_val: Vec<(Image, LabelMap)>,
    pub b_train: SequesteredSplit,
    pub b_val: Vec<(Image, LabelMap)>,
    pub b_test: Vec<(Image, LabelMap)>,
}

fn generate_split(
    config: &DataConfig,
    name: &str,
    style: &ModalityStyle,
    count: usize,
) -> Result<Vec<(Image, LabelMap)>> {
    (0..count)
        .map(|i| {
            let anatomy_seed = derive_seed_indexed(config.seed, &format!("{name}.anatomy"), i as u64);
            let render_seed = derive_seed_indexed(config.seed, &format!("{name}.render"), i as u64);
            let layout = sample_anatomy(anatomy_seed, &config.anatomy)?;
            let img = render_modality(&layout, style, render_seed)?;
            Ok((img, layout.labels))
        })
        .collect()
}

/// Build the bundle in memory; splits are unpaired by construction (disjoint
/// anatomy seed streams).
pub fn generate_bundle(config: &DataConfig) -> Result<DatasetBundle> {
    config.validate()?;
    let a_train = generate_split(config, "a_train", &config.style_a, config.a_train)?;
    let a_val = generate_split(config, "a_val", &config.style_a, config.a_val)?;
    let b_train_items = generate_split(config, "b_train", &config.style_b, config.b_train)?;
    let b_val = generate_split(config, "b_val", &config.style_b, config.b_val)?;
    let b_test = generate_split(config, "b_test", &config.style_b, config.b_test)?;
    let (imgs, labels) = b_train_items.into_iter().unzip();
    Ok(DatasetBundle {
        config: config.clone(),
        a_train,
        a_val,
        b_train: SequesteredSplit::new(imgs, labels),
        b_val,
        b_test,
    })
}

/// Build and persist: manifest + raw blobs + view PNGs under `out_dir`.
pub fn build_dataset(config: &DataConfig, out_dir: &Path) -> Result<DatasetBundle> {
    let bundle = generate_bundle(config)?;
    crate::data::io::save_dataset(&bundle, out_dir)?;
    Ok(bundle)
}

/// Index pairs for one epoch of unpaired draws: independent shuffles of both
/// splits, epoch length max(|A|, |B|), the shorter split cycled.
pub fn unpaired_epoch(len_a: usize, len_b: usize, seed: u64, epoch: u64) -> Vec<(usize, usize)> {
    assert!(len_a > 0 && len_b > 0, "both splits must be non-empty");
    let n = len_a.max(len_b);
    let perm_a = permutation(&mut rng_from(derive_seed_indexed(seed, "epoch.a", epoch)), len_a);
    let perm_b = permutation(&mut rng_from(derive_seed_indexed(seed, "epoch.b", epoch)), len_b);
    (0..n).map(|i| (perm_a[i % len_a], perm_b[i % len_b])).collect()
}

/// One epoch of (x, m, y) triples grouped into batches.
pub fn unpaired_batches<'a>(
    a: &'a [(Image, LabelMap)],
    b: &'a [Image],
    seed: u64,
    epoch: u64,
    batch_size: usize,
) -> Vec<Vec<(&'a Image, &'a LabelMap, &'a Image)>> {
    assert!(batch_size >= 1);
    let pairs = unpaired_epoch(a.len(), b.len(), seed, epoch);
    pairs
        .chunks(batch_size)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&(ai, bi)| (&a[ai].0, &a[ai].1, &b[bi]))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn tiny_config() -> DataConfig {
        DataConfig { a_train: 3, a_val: 1, b_train: 2, b_val: 1, b_test: 2, ..DataConfig::desk() }
    }

    #[test]
    fn desk_preset_matches_cohort_sizes() {
        let cfg = DataConfig::desk();
        assert_eq!(cfg.a_train, 60);
        assert_eq!(cfg.b_test, 19);
    }

    #[test]
    fn label_counter_starts_at_zero_and_counts_reads() {
        let bundle = generate_bundle(&tiny_config()).unwrap();
        assert_eq!(bundle.b_train.label_reads(), 0);
        let _ = bundle.b_train.read_label(0);
        let _ = bundle.b_train.read_label(1);
        assert_eq!(bundle.b_train.label_reads(), 2);
    }

    #[test]
    fn bundle_is_deterministic_per_seed() {
        let cfg = tiny_config();
        let a = generate_bundle(&cfg).unwrap();
        let b = generate_bundle(&cfg).unwrap();
        assert_eq!(a.a_train, b.a_train);
        assert_eq!(a.b_test, b.b_test);
        assert_eq!(a.b_train.images(), b.b_train.images());
    }

    #[test]
    fn splits_are_unpaired_by_construction() {
        let bundle = generate_bundle(&tiny_config()).unwrap();
        // disjoint anatomy seed streams: no label map repeats across splits
        assert_ne!(bundle.a_train[0].1, bundle.b_test[0].1);
        assert_ne!(bundle.b_val[0].1, bundle.b_test[0].1);
    }

    #[test]
    fn epoch_cycles_shorter_split() {
        let pairs = unpaired_epoch(3, 2, 5, 0);
        assert_eq!(pairs.len(), 3);
        let a_idx: HashSet<usize> = pairs.iter().map(|p| p.0).collect();
        assert_eq!(a_idx.len(), 3);
        // B has 2 items over 3 draws: one index repeats
        let b_idx: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        assert_eq!(b_idx[2], b_idx[0]);
    }

    #[test]
    fn epochs_are_deterministic_per_seed_and_vary_by_epoch() {
        assert_eq!(unpaired_epoch(10, 7, 5, 3), unpaired_epoch(10, 7, 5, 3));
        assert_ne!(unpaired_epoch(10, 7, 5, 3), unpaired_epoch(10, 7, 5, 4));
        assert_ne!(unpaired_epoch(10, 7, 5, 3), unpaired_epoch(10, 7, 6, 3));
    }

    #[test]
    fn pairing_is_not_constant_across_draws() {
        let mut pairs = HashSet::new();
        for epoch in 0..100 {
            pairs.extend(unpaired_epoch(10, 7, 5, epoch));
        }
        assert!(pairs.len() > 10, "only {} distinct pairs", pairs.len());
    }

    #[test]
    fn batches_group_triples() {
        let bundle = generate_bundle(&tiny_config()).unwrap();
        let batches = unpaired_batches(&bundle.a_train, bundle.b_train.images(), 5, 0, 2);
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[0].len(), 2);
        assert_eq!(batches[1].len(), 1);
        assert_eq!(bundle.b_train.label_reads(), 0);
    }
}
