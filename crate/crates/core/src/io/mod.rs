//! Matrix files, column-batch streaming, and metric tables.

pub mod batch;
pub mod bmat;
pub mod metrics;

pub use batch::{BatchSource, ColumnStore};
pub use bmat::{
    inspect_bmat, read_bmat, read_bmat_capped, write_bmat, BmatHeader, BmatWriter, MappedBmat,
};
pub use metrics::{read_metrics_csv, write_metrics_csv, MetricTable, MetricValue};
