pub mod ingest;
pub mod seed;
pub mod friction;
pub mod matrix;
pub mod dissim;
pub mod embed;
pub mod cluster;
pub mod synthetic;
pub mod pipeline;
pub mod validate;
pub mod report;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/votes.md")]
    mod votes {}
    #[doc = include_str!("../../../book/src/friction.md")]
    mod friction {}
    #[doc = include_str!("../../../book/src/dissimilarity.md")]
    mod dissimilarity {}
    #[doc = include_str!("../../../book/src/embedding.md")]
    mod embedding {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/determinism.md")]
    mod determinism {}
    #[doc = include_str!("../../../book/src/charts.md")]
    mod charts {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
