//! Persistent AVL map from variable ids to terms.
//!
//! Nodes are never modified after construction. An insert copies the nodes on
//! the search path (plus whatever the rebalancing rotation touches, which is
//! always on that path) and shares every other subtree with the previous
//! version, so any number of threads can hold and read old versions.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::term::{Term, Var};

type Link = Option<Arc<Node>>;

struct Node {
    key: Var,
    value: Term,
    left: Link,
    right: Link,
    height: u8,
}

/// A substitution binding each variable to at most one term.
#[derive(Clone, Default)]
pub struct Subst {
    root: Link,
    len: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("variable {0} is already bound")]
pub struct DuplicateKey(pub Var);

fn height(link: &Link) -> u8 {
    link.as_ref().map_or(0, |n| n.height)
}

fn node(key: Var, value: Term, left: Link, right: Link) -> Arc<Node> {
    let height = 1 + height(&left).max(height(&right));
    Arc::new(Node {
        key,
        value,
        left,
        right,
        height,
    })
}

/// Builds a node from parts whose heights differ by at most two, rotating as needed.
fn balanced(key: Var, value: Term, left: Link, right: Link) -> Arc<Node> {
    let (hl, hr) = (height(&left), height(&right));
    if hl > hr + 1 {
        let l = left.expect("left-heavy implies a left child");
        if height(&l.left) >= height(&l.right) {
            let new_right = node(key, value, l.right.clone(), right);
            node(l.key, l.value.clone(), l.left.clone(), Some(new_right))
        } else {
            let lr = l
                .right
                .as_ref()
                .expect("left-right heavy implies a grandchild");
            let new_left = node(l.key, l.value.clone(), l.left.clone(), lr.left.clone());
            let new_right = node(key, value, lr.right.clone(), right);
            node(lr.key, lr.value.clone(), Some(new_left), Some(new_right))
        }
    } else if hr > hl + 1 {
        let r = right.expect("right-heavy implies a right child");
        if height(&r.right) >= height(&r.left) {
            let new_left = node(key, value, left, r.left.clone());
            node(r.key, r.value.clone(), Some(new_left), r.right.clone())
        } else {
            let rl = r
                .left
                .as_ref()
                .expect("right-left heavy implies a grandchild");
            let new_left = node(key, value, left, rl.left.clone());
            let new_right = node(r.key, r.value.clone(), rl.right.clone(), r.right.clone());
            node(rl.key, rl.value.clone(), Some(new_left), Some(new_right))
        }
    } else {
        node(key, value, left, right)
    }
}

fn insert_at(link: &Link, key: Var, value: Term) -> Result<Arc<Node>, DuplicateKey> {
    let Some(n) = link else {
        return Ok(node(key, value, None, None));
    };
    match key.cmp(&n.key) {
        Ordering::Less => {
            let left = insert_at(&n.left, key, value)?;
            Ok(balanced(
                n.key,
                n.value.clone(),
                Some(left),
                n.right.clone(),
            ))
        }
        Ordering::Greater => {
            let right = insert_at(&n.right, key, value)?;
            Ok(balanced(
                n.key,
                n.value.clone(),
                n.left.clone(),
                Some(right),
            ))
        }
        Ordering::Equal => Err(DuplicateKey(key)),
    }
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Height of the tree; the empty map has height 0.
    pub fn height(&self) -> usize {
        height(&self.root) as usize
    }

    pub fn get(&self, key: Var) -> Option<&Term> {
        let mut cur = &self.root;
        while let Some(n) = cur {
            match key.cmp(&n.key) {
                Ordering::Less => cur = &n.left,
                Ordering::Greater => cur = &n.right,
                Ordering::Equal => return Some(&n.value),
            }
        }
        None
    }

    pub fn contains(&self, key: Var) -> bool {
        self.get(key).is_some()
    }

    /// Returns a new map with `key` bound to `value`; `self` is unchanged.
    ///
    /// Substitutions only ever grow, so rebinding a key is reported as an error
    /// instead of overwriting.
    pub fn insert(&self, key: Var, value: Term) -> Result<Subst, DuplicateKey> {
        let root = insert_at(&self.root, key, value)?;
        Ok(Subst {
            root: Some(root),
            len: self.len + 1,
        })
    }

    /// Bindings in ascending key order.
    pub fn iter(&self) -> Iter<'_> {
        let mut iter = Iter { stack: Vec::new() };
        iter.push_left(&self.root);
        iter
    }

    /// Number of nodes in `self` that are physically shared with `older`.
    pub fn shared_nodes(&self, older: &Subst) -> usize {
        let mut old = HashSet::new();
        collect_ptrs(&older.root, &mut old);
        let mut mine = HashSet::new();
        collect_ptrs(&self.root, &mut mine);
        mine.intersection(&old).count()
    }

    /// Checks ordering, stored heights, balance and the cached length.
    pub fn validate(&self) -> Result<(), String> {
        let mut count = 0;
        check(&self.root, None, None, &mut count)?;
        if count != self.len {
            return Err(format!("length {} but {} nodes", self.len, count));
        }
        Ok(())
    }
}

fn collect_ptrs(link: &Link, out: &mut HashSet<*const Node>) {
    let mut stack = vec![link];
    while let Some(l) = stack.pop() {
        if let Some(n) = l {
            out.insert(Arc::as_ptr(n));
            stack.push(&n.left);
            stack.push(&n.right);
        }
    }
}

fn check(link: &Link, lo: Option<Var>, hi: Option<Var>, count: &mut usize) -> Result<u8, String> {
    let Some(n) = link else { return Ok(0) };
    if lo.is_some_and(|lo| n.key <= lo) || hi.is_some_and(|hi| n.key >= hi) {
        return Err(format!("key {} out of order", n.key));
    }
    *count += 1;
    let hl = check(&n.left, lo, Some(n.key), count)?;
    let hr = check(&n.right, Some(n.key), hi, count)?;
    if hl.abs_diff(hr) > 1 {
        return Err(format!("node {} unbalanced: {hl} vs {hr}", n.key));
    }
    let h = 1 + hl.max(hr);
    if h != n.height {
        return Err(format!(
            "node {} stores height {} but has {h}",
            n.key, n.height
        ));
    }
    Ok(h)
}

pub struct Iter<'a> {
    stack: Vec<&'a Node>,
}

impl<'a> Iter<'a> {
    fn push_left(&mut self, mut link: &'a Link) {
        while let Some(n) = link {
            self.stack.push(n);
            link = &n.left;
        }
    }
}

impl<'a> Iterator for Iter<'a> {
    type Item = (Var, &'a Term);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.stack.pop()?;
        self.push_left(&n.right);
        Some((n.key, &n.value))
    }
}

impl fmt::Debug for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(keys: &[u32]) -> Subst {
        keys.iter().fold(Subst::new(), |s, &k| {
            s.insert(Var(k), Term::int(k as i64)).unwrap()
        })
    }

    #[test]
    fn empty_map() {
        let s = Subst::new();
        assert_eq!(s.get(Var(0)), None);
        assert_eq!(s.len(), 0);
        assert_eq!(s.height(), 0);
        let one = s.insert(Var(3), Term::int(5)).unwrap();
        assert_eq!(one.get(Var(3)), Some(&Term::int(5)));
    }

    #[test]
    fn lookup_present_and_absent() {
        let s = Subst::new().insert(Var(0), Term::int(5)).unwrap();
        assert_eq!(s.get(Var(0)), Some(&Term::int(5)));
        assert_eq!(s.get(Var(1)), None);
    }

    #[test]
    fn ascending_seven_has_height_three() {
        let s = build(&[1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(s.height(), 3);
        s.validate().unwrap();
    }

    #[test]
    fn every_order_of_seven_keys_stays_balanced() {
        // All 5040 insertion orders; an AVL tree of 7 nodes has height 3 or 4.
        let mut keys = [1u32, 2, 3, 4, 5, 6, 7];
        let mut heights = HashSet::new();
        permute(&mut keys, 0, &mut |order| {
            let s = build(order);
            s.validate().unwrap();
            heights.insert(s.height());
        });
        assert!(heights.iter().all(|h| (3..=4).contains(h)), "{heights:?}");
    }

    fn permute(keys: &mut [u32], k: usize, f: &mut dyn FnMut(&[u32])) {
        if k == keys.len() {
            f(keys);
            return;
        }
        for i in k..keys.len() {
            keys.swap(k, i);
            permute(keys, k + 1, f);
            keys.swap(k, i);
        }
    }

    #[test]
    fn duplicate_insert_is_rejected() {
        let s = build(&[1, 2, 3]);
        assert_eq!(
            s.insert(Var(2), Term::int(0)).unwrap_err(),
            DuplicateKey(Var(2))
        );
        assert_eq!(s.get(Var(2)), Some(&Term::int(2)));
    }

    #[test]
    fn old_versions_are_unchanged() {
        let old = build(&[5, 1, 9]);
        let new = old.insert(Var(4), Term::int(40)).unwrap();
        assert_eq!(old.get(Var(4)), None);
        assert_eq!(old.len(), 3);
        for k in [5, 1, 9] {
            assert_eq!(old.get(Var(k)), new.get(Var(k)));
        }
    }

    #[test]
    fn iter_is_sorted() {
        let s = build(&[8, 3, 5, 1, 9, 2]);
        let keys: Vec<u32> = s.iter().map(|(k, _)| k.0).collect();
        assert_eq!(keys, vec![1, 2, 3, 5, 8, 9]);
    }

    #[test]
    fn insert_shares_all_but_one_path() {
        let old = build(&(0..100).collect::<Vec<_>>());
        let new = old.insert(Var(1000), Term::Nil).unwrap();
        let shared = new.shared_nodes(&old);
        let fresh = new.len() - shared;
        assert!(
            fresh <= old.height() + 1,
            "{fresh} new nodes for height {}",
            old.height()
        );
        assert!(shared >= old.len() - old.height() - 2);
    }
}
