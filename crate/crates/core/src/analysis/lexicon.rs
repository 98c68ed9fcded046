use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lexical class of a two-word probe phrase, named by its first word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Determiner,
    Quantifier,
    Adjective,
    NounControl,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Determiner, Category::Quantifier, Category::Adjective, Category::NounControl];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Determiner => "determiner",
            Category::Quantifier => "quantifier",
            Category::Adjective => "adjective",
            Category::NounControl => "noun-control",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown category `{s}`")))
    }
}

/// Word lists for building probe phrases. Loadable from TOML with the
/// keys `determiners`, `quantifiers`, `adjectives` and `nouns`; missing
/// keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lexicon {
    pub determiners: Vec<String>,
    pub quantifiers: Vec<String>,
    pub adjectives: Vec<String>,
    pub nouns: Vec<String>,
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|w| w.to_string()).collect()
}

impl Default for Lexicon {
    fn default() -> Self {
        Self {
            determiners: words(&["the", "a", "an", "this", "that", "these", "those"]),
            quantifiers: words(&["some", "all", "several", "twelve", "many", "few"]),
            adjectives: words(&["swarming", "grouped", "red", "large", "happy", "old"]),
            nouns: words(&["tree", "cow", "dog", "house", "river", "idea", "car", "bird"]),
        }
    }
}

impl Lexicon {
    pub fn from_toml(text: &str) -> Result<Self> {
        let lex: Lexicon = toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("lexicon: {e}")))?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("lexicon serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.nouns.len() < 2 {
            return Err(Error::InvalidConfig("lexicon needs at least two nouns".into()));
        }
        Ok(())
    }

    /// First words of a category. Noun-control phrases start with a noun.
    pub fn modifiers(&self, category: Category) -> &[String] {
        match category {
            Category::Determiner => &self.determiners,
            Category::Quantifier => &self.quantifiers,
            Category::Adjective => &self.adjectives,
            Category::NounControl => &self.nouns,
        }
    }

    /// Every `(first, second)` phrase of a category: modifier × noun, or
    /// ordered pairs of distinct nouns for the control.
    pub fn phrases(&self, category: Category) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for m in self.modifiers(category) {
            for n in &self.nouns {
                if category != Category::NounControl || m != n {
                    out.push((m.clone(), n.clone()));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_names_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!("adverb".parse::<Category>().is_err());
    }

    #[test]
    fn toml_overrides_and_defaults() {
        let lex = Lexicon::from_toml("quantifiers = [\"most\"]\nnouns = [\"tree\", \"cow\"]").unwrap();
        assert_eq!(lex.quantifiers, ["most"]);
        assert_eq!(lex.determiners, Lexicon::default().determiners);
        assert_eq!(Lexicon::from_toml(&lex.to_toml()).unwrap(), lex);
        assert!(Lexicon::from_toml("verbs = []").is_err());
    }

    #[test]
    fn phrase_counts() {
        let lex = Lexicon::default();
        assert_eq!(lex.phrases(Category::Determiner).len(), 7 * 8);
        let control = lex.phrases(Category::NounControl);
        assert_eq!(control.len(), 8 * 7);
        assert!(control.contains(&("tree".into(), "cow".into())));
    }
}
