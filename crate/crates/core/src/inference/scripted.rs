use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{BackendError, BackendResponse, PromptBundle, ReasoningBackend};

/// Replays canned responses in order; used for fault drills and tests.
#[derive(Debug)]
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<Result<BackendResponse, BackendError>>>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(responses: Vec<Result<BackendResponse, BackendError>>) -> Self {
        Self {
            responses: Mutex::new(responses.into()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ReasoningBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn respond(&self, _prompt: &PromptBundle) -> Result<BackendResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.responses
            .lock()
            .expect("script lock")
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::Unavailable("script exhausted".into())))
    }
}

/// Fails every call with the same error.
#[derive(Debug)]
pub struct FailingBackend {
    error: BackendError,
    calls: AtomicUsize,
}

impl FailingBackend {
    pub fn new(error: BackendError) -> Self {
        Self {
            error,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ReasoningBackend for FailingBackend {
    fn name(&self) -> &str {
        "failing"
    }

    fn respond(&self, _prompt: &PromptBundle) -> Result<BackendResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(self.error.clone())
    }
}
