//! Synthetic dataset generation: procedural patterns, blurred pairs and the
//! JSON-lines manifest describing them.

mod manifest;
mod patterns;
mod synth;

pub use manifest::{DatasetManifest, ManifestEntry, Split, MANIFEST_FILE, MANIFEST_FORMAT_VERSION};
pub use patterns::{generate_pattern, CHECKER_CELL_FRACTION, PATTERNS};
pub use synth::{
    all_patterns, make_test_split, pattern_set, sample_test_angles, synthesize_pairs,
    synthesize_split, BlurSynthesisConfig, SharpImage, SYNTHESIZER, TEST_ANGLE_RANGE,
};
