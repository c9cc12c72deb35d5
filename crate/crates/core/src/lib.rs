pub mod env_harness;
pub mod generation;
pub mod llm_gateway;
pub mod numfmt;
pub mod retrieval;
pub mod semantic_forest;
pub mod topo_map;
