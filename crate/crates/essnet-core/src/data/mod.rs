//! Synthetic two-modality phantom dataset: generation, persistence, and
//! unpaired streaming, with target-modality labels sequestered from training.

pub mod dataset;
pub mod io;
pub mod phantom;
pub mod style;

pub use dataset::{
    build_dataset, generate_bundle, unpaired_batches, unpaired_epoch, DataConfig, DatasetBundle,
    SequesteredSplit,
};
pub use io::{load_dataset, save_dataset};
pub use phantom::{sample_anatomy, AnatomyConfig, AnatomyLayout, Ellipse};
pub use style::{render_modality, ModalityStyle};
