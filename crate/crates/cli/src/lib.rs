//! Library surface of the CLI: bundles, manifests, and the command
//! implementations, callable in-process by integration tests.

pub mod bundle;
pub mod commands;
pub mod manifest;

pub use bundle::{load_bundle, Bundle};
pub use commands::{
    cmd_evaluate, cmd_export_embeddings, cmd_fingerprint, cmd_predict, cmd_prepare, cmd_train,
    EvaluateArgs, ExportArgs, FingerprintArgs, PredictArgs, PrepareArgs, TrainArgs,
};
pub use manifest::RunManifest;
