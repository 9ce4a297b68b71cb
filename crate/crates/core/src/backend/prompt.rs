use crate::error::{Error, Result};

/// The words whose attention maps localize text.
pub const DEFAULT_PROMPT_WORDS: [&str; 3] = ["text", "letter", "character"];

/// Token ids with the positions of each tracked word and of the end-of-text token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPrompt {
    tokens: Vec<u32>,
    tracked: Vec<(String, Vec<usize>)>,
    end_position: usize,
}

impl TokenizedPrompt {
    pub fn new(tokens: Vec<u32>, tracked: Vec<(String, Vec<usize>)>, end_position: usize) -> Result<Self> {
        if end_position >= tokens.len() {
            return Err(Error::contract(format!(
                "end position {end_position} outside {} tokens",
                tokens.len()
            )));
        }
        for (word, positions) in &tracked {
            if positions.is_empty() {
                return Err(Error::contract(format!("tracked word '{word}' has no tokens")));
            }
            if positions.iter().any(|&p| p >= end_position) {
                return Err(Error::contract(format!(
                    "tracked word '{word}' does not precede the end token"
                )));
            }
        }
        Ok(Self {
            tokens,
            tracked,
            end_position,
        })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    /// `(word, token positions)` in prompt order.
    pub fn tracked_positions(&self) -> &[(String, Vec<usize>)] {
        &self.tracked
    }

    pub fn tracked_words(&self) -> Vec<&str> {
        self.tracked.iter().map(|(w, _)| w.as_str()).collect()
    }

    pub fn end_position(&self) -> usize {
        self.end_position
    }

    pub fn is_tracked_position(&self, pos: usize) -> bool {
        self.tracked.iter().any(|(_, p)| p.contains(&pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_enforced() {
        assert!(TokenizedPrompt::new(vec![0, 1, 2], vec![("text".into(), vec![1])], 2).is_ok());
        assert!(TokenizedPrompt::new(vec![0, 1, 2], vec![("text".into(), vec![])], 2).is_err());
        assert!(TokenizedPrompt::new(vec![0, 1, 2], vec![("text".into(), vec![2])], 2).is_err());
        assert!(TokenizedPrompt::new(vec![0, 1], vec![], 2).is_err());
    }
}
