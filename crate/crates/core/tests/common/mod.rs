#![allow(dead_code)]

use proptest::prelude::*;
use synnamon::treebank::SyntaxTree;

pub fn label() -> impl Strategy<Value = String> {
    "[A-Z]{1,3}[A-Z$]?"
}

pub fn word() -> impl Strategy<Value = String> {
    "[a-z0-9'.$#-]{1,6}"
}

/// Trees of depth at most 6 with at most 4 children per node.
pub fn tree() -> impl Strategy<Value = SyntaxTree> {
    let leaf = (label(), word()).prop_map(|(t, w)| SyntaxTree::preterminal(t, w).unwrap());
    leaf.prop_recursive(5, 64, 4, |inner| {
        (label(), prop::collection::vec(inner, 1..=4)).prop_map(|(l, c)| SyntaxTree::phrase(l, c).unwrap())
    })
}

pub fn row(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, d)
}
