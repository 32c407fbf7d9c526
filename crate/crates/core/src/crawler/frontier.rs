//! BFS frontier: a FIFO of discovered-but-unfetched URLs with a seen set.

use std::collections::{HashSet, VecDeque};

/// FIFO frontier. A URL is enqueued at most once ever; strict FIFO dequeue
/// order realizes breadth-first traversal.
#[derive(Debug, Default)]
pub struct Frontier {
    queue: VecDeque<(String, u32)>,
    seen: HashSet<String>,
}

impl Frontier {
    pub fn new() -> Self {
        Frontier::default()
    }

    /// Enqueues the URL at the given depth unless it was ever seen before.
    /// Returns whether it was enqueued.
    pub fn push(&mut self, url: impl Into<String>, depth: u32) -> bool {
        let url = url.into();
        if self.seen.insert(url.clone()) {
            self.queue.push_back((url, depth));
            true
        } else {
            false
        }
    }

    /// Marks a URL as seen without queueing it (redirect targets).
    pub fn mark_seen(&mut self, url: impl Into<String>) {
        self.seen.insert(url.into());
    }

    pub fn pop(&mut self) -> Option<(String, u32)> {
        self.queue.pop_front()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }
}
