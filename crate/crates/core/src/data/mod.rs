//! Tabular data: SMART ingestion, normalization, stratified splitting and
//! imbalance-controlled subsampling.

mod dataset;
mod fixture;
mod normalize;
mod schema;
mod smart;
mod split;

pub use dataset::{read_dataset_csv, write_dataset_csv, FeatureDataset, FeatureMatrix, RowOrigin};
pub use fixture::{generate_fixture, FixtureSpec};
pub use normalize::{apply_normalizer, fit_normalizer, FeatureScale, NormalizerParams};
pub use schema::{FeatureKey, FeatureSchema, Variant};
pub use smart::{load_smart_csv, load_smart_csv_filtered, LoadReport, RawRecord};
pub use split::{stratified_split, subsample_to_ratio, ClassRatio};
