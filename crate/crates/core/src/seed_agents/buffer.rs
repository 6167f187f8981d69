use std::sync::{RwLock, RwLockReadGuard};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::envs::Transition;
use crate::{Error, Result};

/// Order in which a writer overwrites slots of a full buffer, cycled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverwritePerm {
    order: Vec<usize>,
    position: usize,
}

impl OverwritePerm {
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::InvalidParameter("empty overwrite order".into()));
        }
        Ok(Self { order, position: 0 })
    }

    pub fn random<R: Rng + ?Sized>(capacity: usize, rng: &mut R) -> Result<Self> {
        let mut order: Vec<usize> = (0..capacity).collect();
        order.shuffle(rng);
        Self::from_order(order)
    }

    fn next_slot(&mut self) -> usize {
        let slot = self.order[self.position % self.order.len()];
        self.position += 1;
        slot
    }
}

/// Contents of a [`SharedBuffer`] as seen under its lock.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferState<S> {
    pub slots: Vec<Transition<S>>,
    pub capacity: Option<usize>,
    /// Total number of appends so far; the next `obs_index`.
    pub appended: usize,
    /// Number of appends that replaced an existing slot.
    pub overwrites: usize,
}

/// Append-ordered shared store of transitions with an optional capacity.
#[derive(Debug)]
pub struct SharedBuffer<S> {
    inner: RwLock<BufferState<S>>,
}

impl<S: Clone> SharedBuffer<S> {
    pub fn new(capacity: Option<usize>) -> Result<Self> {
        if capacity == Some(0) {
            return Err(Error::InvalidParameter("buffer capacity must be positive".into()));
        }
        Ok(Self { inner: RwLock::new(BufferState { slots: Vec::new(), capacity, appended: 0, overwrites: 0 }) })
    }

    /// Stores `t` under the next `obs_index` and returns that index. A full
    /// buffer overwrites the slot named by `perm`, or the oldest slot without one.
    pub fn append(&self, mut t: Transition<S>, perm: Option<&mut OverwritePerm>) -> Result<usize> {
        let mut st = self.inner.write().expect("buffer lock poisoned");
        let index = st.appended;
        t.obs_index = index;
        match st.capacity {
            Some(cap) if st.slots.len() >= cap => {
                let slot = match perm {
                    Some(p) => p.next_slot(),
                    None => index % cap,
                };
                if slot >= cap {
                    return Err(Error::OutOfRange { index: slot, size: cap });
                }
                st.slots[slot] = t;
                st.overwrites += 1;
            }
            _ => st.slots.push(t),
        }
        st.appended += 1;
        Ok(index)
    }

    /// Consistent read access for the duration of the guard.
    pub fn read(&self) -> RwLockReadGuard<'_, BufferState<S>> {
        self.inner.read().expect("buffer lock poisoned")
    }

    pub fn snapshot(&self) -> Vec<Transition<S>> {
        self.read().slots.clone()
    }

    pub fn len(&self) -> usize {
        self.read().slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn tr(r: f64) -> Transition<usize> {
        Transition { state: 0, action: 0, reward: r, next_state: 0, terminal: false, agent_id: 0, obs_index: 99, time: 0.0 }
    }

    #[test]
    fn append_assigns_dense_indices() {
        let buf = SharedBuffer::new(None).unwrap();
        assert_eq!(buf.append(tr(1.0), None).unwrap(), 0);
        let snap = buf.snapshot();
        assert_eq!(snap.len(), 1);
        assert_eq!(snap[0].obs_index, 0);
        assert_eq!(snap[0].reward, 1.0);
    }

    #[test]
    fn capped_buffer_follows_permutation() {
        let buf = SharedBuffer::new(Some(2)).unwrap();
        let mut perm = OverwritePerm::from_order(vec![1, 0]).unwrap();
        for r in [1.0, 2.0, 3.0] {
            buf.append(tr(r), Some(&mut perm)).unwrap();
        }
        let snap = buf.snapshot();
        assert_eq!(snap.iter().map(|t| t.reward).collect::<Vec<_>>(), vec![1.0, 3.0]);
        assert_eq!(snap[1].obs_index, 2);
        assert_eq!(buf.read().overwrites, 1);
    }

    #[test]
    fn concurrent_appends_get_distinct_indices() {
        let buf = Arc::new(SharedBuffer::new(None).unwrap());
        let handles: Vec<_> = (0..2)
            .map(|k| {
                let buf = Arc::clone(&buf);
                std::thread::spawn(move || (0..50).map(|_| buf.append(tr(k as f64), None).unwrap()).collect::<Vec<_>>())
            })
            .collect();
        let mut all: Vec<usize> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(buf.len(), 100);
    }
}
