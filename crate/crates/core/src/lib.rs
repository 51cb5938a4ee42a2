pub mod address;
pub mod amount;
pub mod build;
pub mod ingest;
pub mod model;
pub mod script;
pub mod synth;
pub mod tsv;
pub mod pipeline;
pub mod profile;
pub mod sampler;
