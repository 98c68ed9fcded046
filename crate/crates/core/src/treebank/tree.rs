//! Labeled constituency trees in bracketed (Penn Treebank style) notation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::treebank::ProductionRule;

/// How tree height is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightConvention {
    /// Count nodes on the longest root-to-word path, including the word.
    #[default]
    Nodes,
    /// Count edges on that path (one less than `Nodes`).
    Edges,
}

impl FromStr for HeightConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodes" => Ok(Self::Nodes),
            "edges" => Ok(Self::Edges),
            other => Err(Error::InvalidConfig(format!(
                "unknown height convention `{other}` (expected nodes|edges)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Body {
    Word(String),
    Children(Vec<SyntaxTree>),
}

/// A constituency tree. Words only occur directly under a preterminal
/// (POS) node, and every phrase node has at least one child.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SyntaxTree {
    label: String,
    body: Body,
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() {
        return Err(Error::InvalidTree("empty label".into()));
    }
    if label.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
        return Err(Error::InvalidTree(format!("label `{label}` contains whitespace or parentheses")));
    }
    Ok(())
}

impl SyntaxTree {
    /// A POS node over a single word.
    pub fn preterminal(tag: impl Into<String>, word: impl Into<String>) -> Result<Self> {
        let label = tag.into();
        let word = word.into();
        check_label(&label)?;
        // Words obey the same token rules as labels.
        check_label(&word).map_err(|_| Error::InvalidTree(format!("invalid word `{word}`")))?;
        Ok(Self { label, body: Body::Word(word) })
    }

    /// A phrase node over one or more subtrees.
    pub fn phrase(label: impl Into<String>, children: Vec<SyntaxTree>) -> Result<Self> {
        let label = label.into();
        check_label(&label)?;
        if children.is_empty() {
            return Err(Error::InvalidTree(format!("phrase `{label}` has no children")));
        }
        Ok(Self { label, body: Body::Children(children) })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The word under this node, if it is a preterminal.
    pub fn word(&self) -> Option<&str> {
        match &self.body {
            Body::Word(w) => Some(w),
            Body::Children(_) => None,
        }
    }

    /// Subtrees of a phrase node; empty for preterminals.
    pub fn children(&self) -> &[SyntaxTree] {
        match &self.body {
            Body::Word(_) => &[],
            Body::Children(c) => c,
        }
    }

    pub fn is_preterminal(&self) -> bool {
        matches!(self.body, Body::Word(_))
    }

    /// Words in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_preterminals(&mut |t| out.push(t.word().unwrap_or_default()));
        out
    }

    pub fn leaf_count(&self) -> usize {
        match &self.body {
            Body::Word(_) => 1,
            Body::Children(c) => c.iter().map(SyntaxTree::leaf_count).sum(),
        }
    }

    /// Number of phrase (non-preterminal) nodes.
    pub fn phrase_count(&self) -> usize {
        match &self.body {
            Body::Word(_) => 0,
            Body::Children(c) => 1 + c.iter().map(SyntaxTree::phrase_count).sum::<usize>(),
        }
    }

    pub fn height(&self, convention: HeightConvention) -> usize {
        let nodes = self.node_height();
        match convention {
            HeightConvention::Nodes => nodes,
            HeightConvention::Edges => nodes - 1,
        }
    }

    fn node_height(&self) -> usize {
        match &self.body {
            Body::Word(_) => 2,
            Body::Children(c) => 1 + c.iter().map(SyntaxTree::node_height).max().unwrap_or(0),
        }
    }

    /// The production realized at this node, if it is a phrase.
    pub fn production(&self) -> Option<ProductionRule> {
        match &self.body {
            Body::Word(_) => None,
            Body::Children(c) => Some(ProductionRule::new(
                self.label.clone(),
                c.iter().map(|t| t.label.clone()).collect(),
            )),
        }
    }

    /// All productions in pre-order, with multiplicity.
    pub fn productions(&self) -> Vec<ProductionRule> {
        let mut out = Vec::new();
        self.collect_productions(&mut out);
        out
    }

    fn collect_productions(&self, out: &mut Vec<ProductionRule>) {
        if let Some(rule) = self.production() {
            out.push(rule);
            for child in self.children() {
                child.collect_productions(out);
            }
        }
    }

    pub fn pos_tags(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_preterminals(&mut |t| {
            out.insert(t.label.clone());
        });
        out
    }

    /// Productions (multiset) and POS tags (set) used by this tree.
    pub fn extract_productions(&self) -> (Vec<ProductionRule>, BTreeSet<String>) {
        (self.productions(), self.pos_tags())
    }

    fn visit_preterminals<'a>(&'a self, f: &mut impl FnMut(&'a SyntaxTree)) {
        match &self.body {
            Body::Word(_) => f(self),
            Body::Children(c) => c.iter().for_each(|t| t.visit_preterminals(f)),
        }
    }

    /// Strip PTB function tags and indices from labels and drop empty
    /// elements (`-NONE-`). Returns `None` if nothing remains.
    pub fn normalize_ptb(&self) -> Option<SyntaxTree> {
        let label = strip_function_tags(&self.label).to_string();
        match &self.body {
            Body::Word(w) => {
                if self.label == "-NONE-" {
                    None
                } else {
                    Some(SyntaxTree { label, body: Body::Word(w.clone()) })
                }
            }
            Body::Children(c) => {
                let kept: Vec<_> = c.iter().filter_map(SyntaxTree::normalize_ptb).collect();
                if kept.is_empty() {
                    None
                } else {
                    Some(SyntaxTree { label, body: Body::Children(kept) })
                }
            }
        }
    }

    fn write_bracketed(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        match &self.body {
            Body::Word(w) => {
                out.push(' ');
                out.push_str(w);
            }
            Body::Children(c) => {
                for child in c {
                    out.push(' ');
                    child.write_bracketed(out);
                }
            }
        }
        out.push(')');
    }
}

/// `NP-SBJ-1` -> `NP`, `NP=2` -> `NP`. Labels that start with `-`
/// (`-NONE-`, `-LRB-`) are left alone.
fn strip_function_tags(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.char_indices().skip(1).find(|&(_, c)| c == '-' || c == '=') {
        Some((i, _)) => &label[..i],
        None => label,
    }
}

impl fmt::Display for SyntaxTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_bracketed(&mut s);
        f.write_str(&s)
    }
}

impl FromStr for SyntaxTree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse_tree(s)
    }
}

/// Canonical single-space bracketed form.
pub fn serialize_tree(tree: &SyntaxTree) -> String {
    tree.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Option<(usize, Token<'a>)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        // Non-ASCII whitespace is kept inside atoms; only ASCII separates.
        let start = self.pos;
        let b = *bytes.get(start)?;
        let tok = match b {
            b'(' => {
                self.pos += 1;
                Token::Open
            }
            b')' => {
                self.pos += 1;
                Token::Close
            }
            _ => {
                while self.pos < bytes.len()
                    && !bytes[self.pos].is_ascii_whitespace()
                    && bytes[self.pos] != b'('
                    && bytes[self.pos] != b')'
                {
                    self.pos += 1;
                }
                Token::Atom(&self.src[start..self.pos])
            }
        };
        Some((start, tok))
    }

    fn peek(&mut self) -> Option<(usize, Token<'a>)> {
        let saved = self.pos;
        let t = self.next();
        self.pos = saved;
        t
    }
}

fn err(kind: ParseErrorKind, offset: usize) -> ParseError {
    ParseError { kind, offset }
}

/// Parse one bracketed tree. A label-less outer wrapper around a single
/// tree (`( (S ...) )`, as in PTB `.mrg` files) is unwrapped.
pub fn parse_tree(text: &str) -> Result<SyntaxTree, ParseError> {
    let mut lx = Lexer { src: text, pos: 0 };
    let tree = match lx.next() {
        None => return Err(err(ParseErrorKind::EmptyNode, 0)),
        Some((_, Token::Open)) => match lx.peek() {
            Some((_, Token::Open)) => {
                lx.next();
                let inner = parse_after_open(&mut lx)?;
                expect_close(&mut lx, text.len())?;
                inner
            }
            _ => parse_after_open(&mut lx)?,
        },
        Some((off, Token::Close)) => return Err(err(ParseErrorKind::UnbalancedParens, off)),
        Some((off, Token::Atom(_))) => return Err(err(ParseErrorKind::UnexpectedToken, off)),
    };
    match lx.next() {
        None => Ok(tree),
        Some((off, Token::Close)) => Err(err(ParseErrorKind::UnbalancedParens, off)),
        Some((off, _)) => Err(err(ParseErrorKind::TrailingGarbage, off)),
    }
}

fn expect_close(lx: &mut Lexer<'_>, end: usize) -> Result<(), ParseError> {
    match lx.next() {
        Some((_, Token::Close)) => Ok(()),
        None => Err(err(ParseErrorKind::UnbalancedParens, end)),
        Some((off, _)) => Err(err(ParseErrorKind::UnexpectedToken, off)),
    }
}

/// Parses `label body )` after an opening paren has been consumed.
fn parse_after_open(lx: &mut Lexer<'_>) -> Result<SyntaxTree, ParseError> {
    let end = lx.src.len();
    let (label_off, label) = match lx.next() {
        Some((off, Token::Atom(a))) => (off, a),
        Some((off, Token::Close)) => return Err(err(ParseErrorKind::EmptyNode, off)),
        Some((off, Token::Open)) => return Err(err(ParseErrorKind::EmptyNode, off)),
        None => return Err(err(ParseErrorKind::UnbalancedParens, end)),
    };
    match lx.next() {
        None => Err(err(ParseErrorKind::UnbalancedParens, end)),
        Some((_, Token::Close)) => Err(err(ParseErrorKind::EmptyNode, label_off)),
        Some((_, Token::Atom(word))) => {
            expect_close(lx, end)?;
            Ok(SyntaxTree { label: label.to_string(), body: Body::Word(word.to_string()) })
        }
        Some((_, Token::Open)) => {
            let mut children = vec![parse_after_open(lx)?];
            loop {
                match lx.next() {
                    Some((_, Token::Open)) => children.push(parse_after_open(lx)?),
                    Some((_, Token::Close)) => break,
                    Some((off, Token::Atom(_))) => return Err(err(ParseErrorKind::UnexpectedToken, off)),
                    None => return Err(err(ParseErrorKind::UnbalancedParens, end)),
                }
            }
            Ok(SyntaxTree { label: label.to_string(), body: Body::Children(children) })
        }
    }
}
