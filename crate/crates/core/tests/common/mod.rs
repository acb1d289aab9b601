#![allow(dead_code)]

pub mod dsl_oracle;
pub mod gen;
pub mod grits_oracle;
pub mod scenarios;
pub mod tree_oracle;
