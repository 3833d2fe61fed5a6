use std::fmt;
use std::sync::Arc;

struct Node<S> {
    state: S,
    len: usize,
    parent: Option<Arc<Node<S>>>,
}

/// A path built in reverse time.
///
/// Index 0 is the terminal state drawn from the terminal law; each `push`
/// appends the next predecessor. Prefixes are shared between particles that
/// descend from a common ancestor, so cloning is O(1).
pub struct Trajectory<S> {
    head: Option<Arc<Node<S>>>,
}

impl<S> Trajectory<S> {
    pub fn new(terminal: S) -> Self {
        Self {
            head: Some(Arc::new(Node {
                state: terminal,
                len: 1,
                parent: None,
            })),
        }
    }

    pub fn push(&mut self, state: S) {
        let parent = self.head.take();
        let len = parent.as_ref().map_or(0, |p| p.len) + 1;
        self.head = Some(Arc::new(Node { state, len, parent }));
    }

    pub fn len(&self) -> usize {
        self.head.as_ref().map_or(0, |n| n.len)
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_none()
    }

    /// Most recently appended state.
    pub fn last(&self) -> &S {
        &self.head.as_ref().expect("trajectory is never empty").state
    }

    /// The state `k` positions before the last one (`0` is the last).
    pub fn from_end(&self, k: usize) -> Option<&S> {
        self.iter_rev().nth(k)
    }

    /// States from the most recent back to the terminal one.
    pub fn iter_rev(&self) -> impl Iterator<Item = &S> {
        let mut cur = self.head.as_deref();
        std::iter::from_fn(move || {
            let node = cur?;
            cur = node.parent.as_deref();
            Some(&node.state)
        })
    }

    /// States in construction order: terminal first.
    pub fn states(&self) -> Vec<S>
    where
        S: Clone,
    {
        let mut v: Vec<S> = self.iter_rev().cloned().collect();
        v.reverse();
        v
    }
}

impl<S> Clone for Trajectory<S> {
    fn clone(&self) -> Self {
        Self {
            head: self.head.clone(),
        }
    }
}

// Long unshared chains would otherwise drop recursively.
impl<S> Drop for Trajectory<S> {
    fn drop(&mut self) {
        let mut cur = self.head.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut n) => cur = n.parent.take(),
                Err(_) => break,
            }
        }
    }
}

impl<S: fmt::Debug> fmt::Debug for Trajectory<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut states: Vec<&S> = self.iter_rev().collect();
        states.reverse();
        f.debug_list().entries(states).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_order() {
        let mut t = Trajectory::new(3);
        t.push(2);
        t.push(1);
        assert_eq!(t.len(), 3);
        assert_eq!(*t.last(), 1);
        assert_eq!(t.states(), vec![3, 2, 1]);
        assert_eq!(t.from_end(1), Some(&2));
        assert_eq!(t.from_end(3), None);
    }

    #[test]
    fn clones_share_prefix_but_diverge() {
        let mut a = Trajectory::new(0);
        a.push(1);
        let mut b = a.clone();
        a.push(2);
        b.push(5);
        assert_eq!(a.states(), vec![0, 1, 2]);
        assert_eq!(b.states(), vec![0, 1, 5]);
    }

    #[test]
    fn very_long_chain_drops_without_overflow() {
        let mut t = Trajectory::new(0_u32);
        for i in 0..2_000_000 {
            t.push(i);
        }
        assert_eq!(t.len(), 2_000_001);
        drop(t);
    }
}
