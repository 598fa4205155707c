//! Spectral parameter recovery for supervised LDA.
//!
//! Implements a method-of-moments pipeline: empirical low-order moments of
//! documents and responses are whitened and decomposed with a robust tensor
//! power method, yielding the topic-word matrix, the Dirichlet prior, the
//! regression weights, and the response noise.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod moments;
pub mod recovery;
pub mod spectral;
mod seeding;
pub mod tensor;

pub use corpus::{
    read_docword, read_model, read_responses, write_docword, write_model, write_responses,
    Corpus, CorpusStats, Document,
};
pub use error::{Error, Result};
pub use eval::{
    evaluate, infer_mixture_exact, infer_mixture_gibbs, match_topics, EvalReport, GibbsConfig,
    ParamErrors, PerTopicRow, TopicMatching,
};
pub use model::{
    dirichlet_moments, generate_corpus, population_joint_moments, population_moments,
    sample_model, DirichletMoments, ExactJointMoments, ExactMoments, JointTopicMatrix, SldaModel,
};
pub use moments::{
    estimate_joint_moments, estimate_moments, whitened_m3, whitened_n3, JointMomentAccumulator,
    JointMomentSet, MomentAccumulator, MomentSet, MomentWork, WhitenedTensor,
};
pub use recovery::{
    recover_joint, recover_joint_from_moments, recover_sigma, recover_two_stage,
    recover_two_stage_from_moments, Diagnostics, Method, RecoveredModel, RecoveryConfig,
    SigmaEstimate, WhiteningKind,
};
pub use spectral::{
    robust_tpm, whiten_exact, whiten_randomized, whitening_residual, EigenDecomposition,
    EigenPair, TpmConfig, WhiteningMatrix,
};
pub use tensor::SymTensor3;
