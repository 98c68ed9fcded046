//! Treebank handling: trees, production rules, corpus filtering and
//! coverage-preserving splits.

mod corpus;
mod rule;
mod tree;

pub use corpus::{
    filter_corpus, parse_treebank, read_treebank, rule_frequencies, select_top_rules, split_corpus,
    split_indices, write_treebank, CorpusFilterConfig, ReadOptions, Split, SplitPlan,
};
pub use rule::ProductionRule;
pub use tree::{parse_tree, serialize_tree, HeightConvention, SyntaxTree};
