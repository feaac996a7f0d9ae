//! Datasets, synthetic fixtures and the retrieval evaluation protocol.

pub mod dataset;
pub mod eval;
pub mod report;
pub mod synth;

pub use dataset::{load_features, save_features, FeatureFormat, LabeledDataset};
pub use eval::{precision_at_k, sweep, Method, Precision, QlleParams, SweepConfig};
pub use report::{export_report, import_report, DimRecord, ReportFormat, RetrievalReport, Summary};
pub use synth::{synth_manifold, ManifoldKind, SynthConfig, SynthManifold};
