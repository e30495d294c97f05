pub mod baselines;
pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod format;
pub mod linalg;
pub mod nnet;
pub mod pipeline;
pub mod synthetic;
pub mod train;
