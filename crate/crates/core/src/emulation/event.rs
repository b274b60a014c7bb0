use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("cannot schedule at {time}, clock is already at {now}")]
pub struct PastEventError {
    pub time: f64,
    pub now: f64,
}

/// Identifies a scheduled event; `seq` is unique for the life of a queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHandle {
    pub time: f64,
    pub seq: u64,
}

struct Entry<E> {
    time: f64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Pending events in ascending `(time, seq)` order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
    now: f64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
        }
    }
}

impl<E> EventQueue<E> {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, time: f64, event: E) -> Result<EventHandle, PastEventError> {
        if !(time >= self.now) {
            return Err(PastEventError {
                time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time, seq, event });
        Ok(EventHandle { time, seq })
    }

    /// Pops the next event if it is due by `until`, advancing the clock.
    pub fn pop_until(&mut self, until: f64) -> Option<(EventHandle, E)> {
        if self.heap.peek()?.time > until {
            return None;
        }
        let Entry { time, seq, event } = self.heap.pop()?;
        self.now = time;
        Some((EventHandle { time, seq }, event))
    }

    pub fn advance_to(&mut self, time: f64) {
        if time > self.now {
            self.now = time;
        }
    }
}
