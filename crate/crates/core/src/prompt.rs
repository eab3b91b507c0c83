//! Rewrite prompts: the versioned transformation specifications that the
//! auxiliary model executes and that the stage-2 loop refines.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A goal+details rewrite specification. `generation` 0 is a standard
/// register prompt; each accepted refinement increments it by exactly one
/// and records the parent's hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewritePrompt {
    pub text: String,
    pub register_id: Option<u8>,
    pub generation: u32,
    pub parent_hash: Option<String>,
}

impl RewritePrompt {
    /// A generation-0 prompt, typically a register's standard prompt.
    pub fn standard(text: impl Into<String>, register_id: Option<u8>) -> Self {
        let text = text.into();
        assert!(!text.trim().is_empty(), "prompt text must be non-empty");
        RewritePrompt {
            text,
            register_id,
            generation: 0,
            parent_hash: None,
        }
    }

    /// A refinement of `parent`: generation bumps by one and lineage is
    /// recorded through the parent's content hash.
    pub fn refined(text: impl Into<String>, parent: &RewritePrompt) -> Self {
        let text = text.into();
        assert!(!text.trim().is_empty(), "prompt text must be non-empty");
        RewritePrompt {
            text,
            register_id: parent.register_id,
            generation: parent.generation + 1,
            parent_hash: Some(parent.content_hash()),
        }
    }

    /// Stable content hash used for cache keys and lineage links.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.text.as_bytes());
        hasher.update([0u8]);
        hasher.update(self.register_id.map(|r| r.to_string()).unwrap_or_default());
        hasher.update([0u8]);
        hasher.update(self.generation.to_string());
        hex::encode(hasher.finalize())
    }
}
