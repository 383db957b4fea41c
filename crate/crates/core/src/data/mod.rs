//! Ingest, quality checks, cleaning, encoding, splitting and scaling.

pub mod clean;
pub mod encode;
pub mod outliers;
pub mod scaler;
pub mod schema;
pub mod split;
pub mod table;
pub mod validate;

pub use clean::{clean, clean_with, refill, CleanOptions, Cleaned, Fill, FillRecord};
pub use encode::{encode, Dataset, EncodedColumn, EncodedRows, Encoder, TargetTransform};
pub use outliers::{detect_outliers, quantile_sorted};
pub use scaler::Scaler;
pub use schema::{ColumnKind, ColumnSpec, MissingPolicy, Schema};
pub use split::{split_indices, train_test_split};
pub use table::{load_csv, load_csv_with, read_csv, Cell, LoadOptions, RawTable};
pub use validate::{validate, ColumnReport, ValidationReport};
