//! Graph-regularized sparse PCA filter networks (GS-PCANet) for texture patch
//! classification, with the evaluation metrics used for tumor detection.

pub mod classifier;
pub mod eval;
pub mod graph;
pub mod imagio;
pub mod network;
pub mod numerics;
pub mod patches;
pub mod pipeline;
pub mod spca;
