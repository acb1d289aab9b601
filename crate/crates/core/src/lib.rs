//! Arithmetic table QA toolkit: HTML table reconstruction, a constrained table DSL
//! with exact-decimal execution, a routing pipeline around a chat model, and
//! the TSR / VQA evaluation metrics used to score it.

pub mod bench;
pub mod category;
pub mod dsl;
pub mod gateway;
pub mod jsonx;
pub mod metrics;
pub mod money;
pub mod pipeline;
pub mod sample;
pub mod scoring;
pub mod table;
pub mod text;
