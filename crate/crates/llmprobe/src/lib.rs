//! Zero-shot narrativity probing against a chat-completion endpoint.

mod client;
mod prompt;

pub use client::{
    binarized_kappa, dry_run, extract_content, probe_batch, read_items, Clock, FailureRow,
    HttpReply, ProbeConfig, ProbeItem, ProbeOutcome, ProbeRow, PromptRow, RateLimiter, SystemClock,
    Transport, UreqTransport, BACKOFF_BASE, TOKEN_ENV,
};
pub use prompt::{
    bounds, build_prompt, definition, parse_response, Message, ProbeMode, ProbeValue, SYSTEM_PROMPT,
};

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("cannot parse response {raw:?}: {message}")]
    Parse { raw: String, message: String },

    #[error("{0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}
