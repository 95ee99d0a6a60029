//! Multimodal reward modeling at desk scale: preference-data curation, a
//! scalar-output transformer reward model trained with a pairwise ranking
//! loss, benchmark evaluation, and best-of-N preference pair generation.

pub mod dataset;
pub mod numeric;
pub mod clients;
pub mod curation;
pub mod scoring;
pub mod model;
pub mod training;
pub mod synthetic;
pub mod evaluation;
pub mod mpo;
