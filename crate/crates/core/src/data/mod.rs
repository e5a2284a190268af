//! CSV ingestion, feature encoding and deterministic splitting.
//!
//! Numeric columns are min-max normalized over the loaded file; categorical
//! columns, the sensitive attribute included, are one-hot encoded.

mod dataset;
mod encoding;
mod schema;
pub mod synthetic;

use std::path::Path;

pub use dataset::{Dataset, Example, RowId, SplitSpec, ROW_ID_COLUMN};
pub use encoding::{Encoding, EncodingLayout, FeatureBlock, RawValue};
pub use schema::{ColumnSpec, FeatureKind, FeatureSchema};

use crate::error::Result;

pub fn load_dataset(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    Dataset::load(path, schema)
}
