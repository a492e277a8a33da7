//! Voice-webhook dialogue: transcript repair, ambiguity prompts and sessions.

mod lexicon;
mod session;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexicon::{repair_transcript, LexiconEntry, Repair, TermLexicon, DEFAULT_MAX_NORM_DIST};
pub use session::{
    Clock, DialogueSession, ManualClock, SessionHandle, SessionState, SessionStore, SystemClock,
    Turn, DEFAULT_IDLE_TIMEOUT_SECS,
};

use crate::corpus::normalize_text;
use crate::engine::Advisor;
use crate::generation::{format_for_voice, HistoryTurn, Role};
use crate::retrieval::RetrievalResult;

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
}

/// Top-two fused scores closer than this, with different topics, trigger a
/// clarification question.
pub const AMBIGUITY_MARGIN: f64 = 0.05;

/// Spoken when retrieval or the backend fails.
pub const APOLOGY: &str = "দুঃখিত, এই মুহূর্তে উত্তর দিতে পারছি না। একটু পরে আবার চেষ্টা করুন।";

const UNTITLED_TOPIC: &str = "সাধারণ তথ্য";

fn topic_label(topic: &str) -> &str {
    if topic.trim().is_empty() {
        UNTITLED_TOPIC
    } else {
        topic
    }
}

pub fn clarification_prompt(a: &str, b: &str) -> String {
    format!(
        "আপনি কি '{}' নাকি '{}' সম্পর্কে জানতে চাইছেন?",
        topic_label(a),
        topic_label(b)
    )
}

/// A clarification question when the two best results are nearly tied and
/// come from different topics.
pub fn detect_ambiguity(retrieval: &RetrievalResult) -> Option<String> {
    let [first, second, ..] = retrieval.items.as_slice() else {
        return None;
    };
    if (first.fused - second.fused).abs() < AMBIGUITY_MARGIN && first.topic != second.topic {
        Some(clarification_prompt(&first.topic, &second.topic))
    } else {
        None
    }
}

/// Query used for the turn after a clarification prompt.
pub fn merge_clarification(pending: &str, reply: &str) -> String {
    format!("{} {}", pending.trim(), reply.trim())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub session_id: String,
    pub reply: String,
    pub voice_reply: String,
    pub state: SessionState,
    /// The query actually retrieved for, after repair and merging.
    pub query: String,
    pub repairs: Vec<Repair>,
    pub citations: Vec<String>,
    pub clarification: bool,
    pub upstream_error: bool,
}

pub struct DialogueGateway {
    advisor: Arc<Advisor>,
    store: SessionStore,
    lexicon: TermLexicon,
    max_norm_dist: f64,
}

impl DialogueGateway {
    pub fn new(advisor: Arc<Advisor>, store: SessionStore, lexicon: TermLexicon) -> Self {
        Self {
            advisor,
            store,
            lexicon,
            max_norm_dist: DEFAULT_MAX_NORM_DIST,
        }
    }

    pub fn with_max_norm_dist(mut self, d: f64) -> Self {
        self.max_norm_dist = d;
        self
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn handle_turn(&self, session_id: &str, transcript: &str) -> Result<TurnOutcome, DialogueError> {
        if transcript.trim().is_empty() {
            return Err(DialogueError::EmptyTranscript);
        }
        let handle = self.store.acquire(session_id);
        let mut session = handle.lock().unwrap_or_else(|e| e.into_inner());

        let cleaned = normalize_text(transcript);
        let (repaired, repairs) = repair_transcript(&cleaned, &self.lexicon, self.max_norm_dist);
        let (query, merged) = match (session.state, session.pending_question.take()) {
            (SessionState::AwaitingClarification, Some(pending)) => {
                (merge_clarification(&pending, &repaired), true)
            }
            _ => (repaired.clone(), false),
        };
        let history: Vec<HistoryTurn> = session
            .turns
            .iter()
            .map(|t| HistoryTurn {
                role: t.role,
                text: t.text.clone(),
            })
            .collect();

        let mut citations = Vec::new();
        let mut clarification = false;
        let mut upstream_error = false;
        let reply = match self.advisor.retrieve(&query) {
            Err(e) => {
                tracing::error!(session = session_id, error = %e, "retrieval failed");
                upstream_error = true;
                session.state = SessionState::Open;
                APOLOGY.to_owned()
            }
            Ok(retrieval) => match detect_ambiguity(&retrieval).filter(|_| !merged) {
                Some(prompt) => {
                    clarification = true;
                    session.state = SessionState::AwaitingClarification;
                    session.pending_question = Some(query.clone());
                    prompt
                }
                None => {
                    session.state = SessionState::Open;
                    match self.advisor.answer_from(&query, retrieval, &history) {
                        Ok(answer) => {
                            citations = answer.generation.citations;
                            answer.generation.answer_text
                        }
                        Err(e) => {
                            tracing::error!(session = session_id, error = %e, "generation failed");
                            upstream_error = true;
                            APOLOGY.to_owned()
                        }
                    }
                }
            },
        };

        let now = self.store.now();
        session.push(Role::User, &repaired, now);
        session.push(Role::Assistant, &reply, now);
        Ok(TurnOutcome {
            session_id: session.session_id.clone(),
            voice_reply: format_for_voice(&reply),
            reply,
            state: session.state,
            query,
            repairs,
            citations,
            clarification,
            upstream_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{RankedItem, Timings};

    fn result(scores: &[(f64, &str)]) -> RetrievalResult {
        RetrievalResult {
            query: "q".into(),
            items: scores
                .iter()
                .enumerate()
                .map(|(i, (fused, topic))| RankedItem {
                    chunk_id: format!("c{i}"),
                    text: String::new(),
                    topic: (*topic).into(),
                    semantic: 0.0,
                    lexical: 0.0,
                    metadata_boost: 0.0,
                    fused: *fused,
                    semantic_raw: 0.0,
                    lexical_raw: 0.0,
                })
                .collect(),
            timings: Timings::default(),
        }
    }

    #[test]
    fn near_tie_across_topics_asks() {
        let p = detect_ambiguity(&result(&[(0.91, "ধান রোগ"), (0.90, "পাট রোগ")])).unwrap();
        assert_eq!(p, "আপনি কি 'ধান রোগ' নাকি 'পাট রোগ' সম্পর্কে জানতে চাইছেন?");
    }

    #[test]
    fn clear_margin_or_same_topic_does_not_ask() {
        assert!(detect_ambiguity(&result(&[(0.9, "ধান রোগ"), (0.5, "পাট রোগ")])).is_none());
        assert!(detect_ambiguity(&result(&[(0.9, "ধান রোগ"), (0.89, "ধান রোগ")])).is_none());
        assert!(detect_ambiguity(&result(&[(0.9, "ধান রোগ")])).is_none());
    }
}
