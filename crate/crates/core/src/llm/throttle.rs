use std::sync::{Condvar, Mutex};

use super::{Backend, ChatRequest, EmbeddingVector, LlmError};

/// Caps the number of in-flight backend calls across all threads.
pub struct Throttled<B> {
    inner: B,
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a, B> {
    owner: &'a Throttled<B>,
}

impl<B> Drop for Permit<'_, B> {
    fn drop(&mut self) {
        let mut n = self.owner.in_flight.lock().unwrap();
        *n -= 1;
        self.owner.freed.notify_one();
    }
}

impl<B> Throttled<B> {
    pub fn new(inner: B, cap: usize) -> Self {
        Throttled {
            inner,
            cap: cap.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn acquire(&self) -> Permit<'_, B> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        Permit { owner: self }
    }
}

impl<B: Backend> Backend for Throttled<B> {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let _permit = self.acquire();
        self.inner.chat(request)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        let _permit = self.acquire();
        self.inner.embed(text)
    }
}
