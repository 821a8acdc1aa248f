//! Run-level analysis: feature vectors, clustering, experimental designs and
//! elementary-effects screening.

pub mod cluster;
pub mod design;
pub mod features;
pub mod morris;
pub mod report;

pub use cluster::{
    adjusted_rand_index, gmm_fit, kmeans, pca, silhouette, silhouette_guidance, standardize, Gmm, KMeans, Pca,
    PcaTarget, Standardized,
};
pub use design::{sample_design, DesignMethod, DEFAULT_GRID_CAP};
pub use features::{extract_features, read_features, write_features, RunFeatures, FEATURE_NAMES};
pub use morris::{morris_screen, MorrisEffect, MorrisResult};
pub use report::{cluster_report, ClusterReport, ClusterSummary};
