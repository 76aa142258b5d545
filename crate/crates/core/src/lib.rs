pub mod dataset;
pub mod fingerprint;
pub mod metrics;
pub mod molgraph;
pub mod molpo;
pub mod perturb;
pub mod sampling;
pub mod substruct;
pub mod toymodel;
