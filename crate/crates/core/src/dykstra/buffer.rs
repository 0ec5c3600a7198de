use std::collections::VecDeque;

use crate::geometry::Halfspace;
use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    halfspace: Halfspace,
    active: bool,
}

/// Bounded store of supporting halfspaces, all of which contain `C`.
///
/// When full, an insertion first evicts the oldest halfspace that was inactive
/// in the last QP solve, and otherwise the oldest one. Capacity 0 stores nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceBuffer {
    capacity: usize,
    entries: VecDeque<Entry>,
}

impl HalfspaceBuffer {
    pub const DEFAULT_CAPACITY: usize = 32;

    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored halfspaces, oldest first.
    pub fn halfspaces(&self) -> impl Iterator<Item = &Halfspace> {
        self.entries.iter().map(|e| &e.halfspace)
    }

    /// Adds `h` unless a near-identical halfspace is already stored.
    pub fn insert(&mut self, h: Halfspace) {
        if self.capacity == 0 {
            return;
        }
        let duplicate = self.entries.iter().any(|e| {
            dot(e.halfspace.normal(), h.normal()) > 1.0 - 1e-10
                && (e.halfspace.offset() - h.offset()).abs() < 1e-10
        });
        if duplicate {
            return;
        }
        if self.entries.len() >= self.capacity {
            match self.entries.iter().position(|e| !e.active) {
                Some(i) => {
                    self.entries.remove(i);
                }
                None => {
                    self.entries.pop_front();
                }
            }
        }
        self.entries.push_back(Entry { halfspace: h, active: false });
    }

    /// Indices (into [`halfspaces`](Self::halfspaces)) active in the last solve.
    pub fn active_indices(&self) -> Vec<usize> {
        self.entries.iter().enumerate().filter(|(_, e)| e.active).map(|(i, _)| i).collect()
    }

    /// Records which entries carried a positive multiplier in the last solve.
    pub fn mark_active(&mut self, active: &[usize]) {
        for e in &mut self.entries {
            e.active = false;
        }
        for &i in active {
            if let Some(e) = self.entries.get_mut(i) {
                e.active = true;
            }
        }
    }
}
