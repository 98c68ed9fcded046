use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A rewrite `LHS -> A B ...` realized at a phrase node. Lexical rules
/// (POS -> word) are never represented here.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductionRule {
    lhs: String,
    rhs: Vec<String>,
}

impl ProductionRule {
    /// Panics if `rhs` is empty.
    pub fn new(lhs: impl Into<String>, rhs: Vec<String>) -> Self {
        assert!(!rhs.is_empty(), "production needs at least one right-hand-side label");
        Self { lhs: lhs.into(), rhs }
    }

    pub fn lhs(&self) -> &str {
        &self.lhs
    }

    pub fn rhs(&self) -> &[String] {
        &self.rhs
    }

    /// Number of right-hand-side constituents.
    pub fn arity(&self) -> usize {
        self.rhs.len()
    }
}

impl fmt::Display for ProductionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ->", self.lhs)?;
        for label in &self.rhs {
            write!(f, " {label}")?;
        }
        Ok(())
    }
}

impl FromStr for ProductionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lhs, rhs) = s
            .split_once("->")
            .ok_or_else(|| Error::InvalidConfig(format!("`{s}` is not of the form `LHS -> RHS`")))?;
        let lhs = lhs.trim();
        let rhs: Vec<String> = rhs.split_whitespace().map(str::to_string).collect();
        if lhs.is_empty() || lhs.contains(char::is_whitespace) || rhs.is_empty() {
            return Err(Error::InvalidConfig(format!("`{s}` is not of the form `LHS -> RHS`")));
        }
        Ok(Self::new(lhs, rhs))
    }
}
