//! Compiled full-match regular expressions.
//!
//! The accepted dialect is the portable subset: classes, quantifiers,
//! anchors, alternation and grouping. Backreferences and lookaround are
//! rejected at compile time.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

use regex_automata::meta::Regex;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid pattern `{pattern}`: {message}")]
pub struct PatternError {
    pub pattern: String,
    pub message: String,
}

#[derive(Clone)]
pub struct Pattern {
    source: String,
    regex: Regex,
}

impl Pattern {
    pub fn new(source: &str) -> Result<Self, PatternError> {
        let regex = Regex::new(&format!("^(?:{source})$")).map_err(|e| PatternError {
            pattern: source.into(),
            message: e.to_string(),
        })?;
        Ok(Pattern {
            source: source.into(),
            regex,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the whole of `text` matches.
    pub fn is_full_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Eq for Pattern {}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Pattern").field(&self.source).finish()
    }
}
