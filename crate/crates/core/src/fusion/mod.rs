//! Merging per-view partial textures: weighting, fusing, losses, and the
//! simulator and fitter for the adaptive weighter.

pub mod fit;
pub mod loss;
pub mod simulate;
pub mod weights;

pub use fit::{fit_weighter, FitResult, FitSample, WeighterObjective};
pub use loss::{
    loss_cycle, loss_recon, loss_smooth, loss_smooth_masked, total_weighter_loss, FeatureTransform, IdentityFeature,
    LossBreakdown, LossContext, LossWeights,
};
pub use simulate::{corrupt_depth_edges, edge_corrupted_corpus, simulate_noisy_partials, Denoiser};
pub use weights::{cosine_weights, fuse, weighter_score, WeightField, WeighterParams, Weighting};
