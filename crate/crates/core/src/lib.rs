pub mod config;
pub mod corpus;
pub mod eval;
pub mod perturb;
pub mod pipeline;
pub mod review;
pub mod scorer;
pub mod validate;
