//! On-disk dataset: binary samples, JSON manifest, stratified splits and
//! the generator that ties the simulator to them.

mod format;
mod generate;
mod manifest;
mod split;

pub use format::{read_sample, write_sample, DType, DatasetSample, SampleTensor, HEADER_LEN, MAGIC, MAX_RANK, VERSION};
pub use generate::{assign_labels, dataset_digest, generate_dataset, sample_seeds, GenerateReport, SampleSeeds};
pub use manifest::{sample_file_name, DatasetManifest, ManifestEntry, SkippedSample, FORMAT_VERSION, MANIFEST_FILE, SAMPLES_DIR};
pub use split::{largest_remainder, split_dataset, Split};
