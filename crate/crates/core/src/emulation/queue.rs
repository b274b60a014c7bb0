use std::collections::VecDeque;

use super::PRIORITY_CLASSES;

/// Outcome of offering a packet to a link direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enqueued {
    /// the transmitter was idle and took the packet straight away
    Transmitting,
    Queued,
    Dropped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounters {
    pub enqueued: u64,
    pub dropped: u64,
}

/// Transmit side of one link direction: a FIFO per priority class, served by
/// strict priority, and a single transmitter.
#[derive(Debug, Clone)]
pub struct PortQueue<T> {
    fifos: [VecDeque<T>; PRIORITY_CLASSES],
    capacity: usize,
    pub classes: [ClassCounters; PRIORITY_CLASSES],
    transmitting: bool,
    pub bytes_tx: u64,
    pub drops_link_down: u64,
    /// queued + serializing + propagating
    pub in_flight: usize,
    busy_accum: f64,
    busy_since: f64,
    occupancy_area: f64,
    occupancy_since: f64,
}

impl<T> PortQueue<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            fifos: Default::default(),
            capacity,
            classes: [ClassCounters::default(); PRIORITY_CLASSES],
            transmitting: false,
            bytes_tx: 0,
            drops_link_down: 0,
            in_flight: 0,
            busy_accum: 0.0,
            busy_since: 0.0,
            occupancy_area: 0.0,
            occupancy_since: 0.0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.fifos.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.fifos.iter().all(VecDeque::is_empty)
    }

    pub fn class_len(&self, class: usize) -> usize {
        self.fifos[class].len()
    }

    pub fn is_transmitting(&self) -> bool {
        self.transmitting
    }

    /// Packets queued or being serialized.
    pub fn in_system(&self) -> usize {
        self.len() + usize::from(self.transmitting)
    }

    fn touch(&mut self, now: f64) {
        self.occupancy_area += self.in_system() as f64 * (now - self.occupancy_since);
        self.occupancy_since = now;
    }

    /// Tail drop when the class FIFO is full. A packet arriving at an idle
    /// transmitter with nothing queued bypasses the FIFO.
    pub fn offer(&mut self, now: f64, class: usize, item: T) -> (Enqueued, Option<T>) {
        if !self.transmitting && self.is_empty() {
            self.touch(now);
            self.classes[class].enqueued += 1;
            self.in_flight += 1;
            return (Enqueued::Transmitting, Some(item));
        }
        if self.fifos[class].len() >= self.capacity {
            self.classes[class].dropped += 1;
            return (Enqueued::Dropped, Some(item));
        }
        self.touch(now);
        self.classes[class].enqueued += 1;
        self.in_flight += 1;
        self.fifos[class].push_back(item);
        (Enqueued::Queued, None)
    }

    pub fn start_transmission(&mut self, now: f64) {
        self.touch(now);
        self.transmitting = true;
        self.busy_since = now;
    }

    pub fn finish_transmission(&mut self, now: f64, bytes: u64) {
        self.touch(now);
        self.transmitting = false;
        self.busy_accum += now - self.busy_since;
        self.bytes_tx += bytes;
    }

    /// Head of the highest nonempty class.
    pub fn dequeue(&mut self, now: f64) -> Option<T> {
        self.touch(now);
        self.fifos.iter_mut().rev().find_map(VecDeque::pop_front)
    }

    pub fn arrived(&mut self) {
        self.in_flight -= 1;
    }

    /// Everything waiting, highest class first.
    pub fn flush(&mut self, now: f64) -> Vec<T> {
        self.touch(now);
        let mut out = Vec::new();
        for fifo in self.fifos.iter_mut().rev() {
            out.extend(fifo.drain(..));
        }
        self.in_flight -= out.len();
        out
    }

    /// New per-class capacity; packets beyond it are removed from the tails.
    pub fn set_capacity(&mut self, now: f64, capacity: usize) -> Vec<(usize, T)> {
        self.touch(now);
        self.capacity = capacity;
        let mut out = Vec::new();
        for (class, fifo) in self.fifos.iter_mut().enumerate().rev() {
            while fifo.len() > capacity {
                let item = fifo.pop_back().expect("longer than capacity");
                out.push((class, item));
            }
        }
        for (class, _) in &out {
            self.classes[*class].dropped += 1;
        }
        self.in_flight -= out.len();
        out
    }

    /// Seconds spent serializing up to `now`.
    pub fn busy_time(&self, now: f64) -> f64 {
        self.busy_accum
            + if self.transmitting {
                now - self.busy_since
            } else {
                0.0
            }
    }

    /// Time integral of [`in_system`](Self::in_system) up to `now`.
    pub fn occupancy_area(&self, now: f64) -> f64 {
        self.occupancy_area + self.in_system() as f64 * (now - self.occupancy_since)
    }
}
