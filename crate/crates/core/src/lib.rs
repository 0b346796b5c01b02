pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod llm;
pub mod review;
pub mod util;
