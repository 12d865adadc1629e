use super::RuntimeError;
use crate::procset::{ProcSet, ProcessId};
use crate::subdivision::OrderedPartition;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Single-writer atomic-snapshot memory. Each event is one atomic update or
/// scan, so the schedule order is the linearization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SnapshotMemory<V> {
    cells: Vec<Option<V>>,
}

impl<V: Clone> SnapshotMemory<V> {
    pub fn new(n: usize) -> Self {
        Self {
            cells: vec![None; n],
        }
    }

    pub fn update(&mut self, i: ProcessId, v: V) {
        self.cells[i.index()] = Some(v);
    }

    pub fn scan(&self) -> Vec<Option<V>> {
        self.cells.clone()
    }

    pub fn get(&self, i: ProcessId) -> Option<&V> {
        self.cells[i.index()].as_ref()
    }
}

/// A one-shot immediate-snapshot object. Invocations stay pending until the
/// scheduler returns a block of them; a block sees every value invoked in it
/// and in earlier blocks.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ISObject<V> {
    values: BTreeMap<ProcessId, V>,
    pending: ProcSet,
    blocks: Vec<ProcSet>,
}

impl<V: Clone> Default for ISObject<V> {
    fn default() -> Self {
        Self {
            values: BTreeMap::new(),
            pending: ProcSet::EMPTY,
            blocks: Vec::new(),
        }
    }
}

impl<V: Clone> ISObject<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn invoke(&mut self, i: ProcessId, v: V) -> Result<(), RuntimeError> {
        if self.values.contains_key(&i) {
            return Err(RuntimeError::DoubleInvocation(i));
        }
        self.values.insert(i, v);
        self.pending.insert(i);
        Ok(())
    }

    pub fn pending(&self) -> ProcSet {
        self.pending
    }

    /// Returns the block: each member gets the values of everyone resolved
    /// so far, itself included.
    pub fn resolve(&mut self, block: ProcSet) -> Result<BTreeMap<ProcessId, V>, RuntimeError> {
        if block.is_empty() || !block.is_subset(self.pending) {
            return Err(RuntimeError::Invariant(format!(
                "block {block} is not a set of pending invocations {}",
                self.pending
            )));
        }
        self.pending = self.pending.difference(block);
        self.blocks.push(block);
        let seen = self.resolved();
        Ok(self
            .values
            .iter()
            .filter(|(p, _)| seen.contains(**p))
            .map(|(p, v)| (*p, v.clone()))
            .collect())
    }

    pub fn resolved(&self) -> ProcSet {
        self.blocks.iter().fold(ProcSet::EMPTY, |a, b| a.union(*b))
    }

    /// The output view of a resolved process.
    pub fn view(&self, i: ProcessId) -> Option<ProcSet> {
        let mut acc = ProcSet::EMPTY;
        for b in &self.blocks {
            acc = acc.union(*b);
            if b.contains(i) {
                return Some(acc);
            }
        }
        None
    }

    /// The resolution order, once nothing is pending.
    pub fn partition(&self) -> Option<OrderedPartition> {
        if !self.pending.is_empty() || self.blocks.is_empty() {
            return None;
        }
        OrderedPartition::new(self.blocks.clone()).ok()
    }
}

/// Self-inclusion, containment and immediacy over a view assignment.
pub fn is_properties_hold(views: &BTreeMap<ProcessId, ProcSet>) -> bool {
    views.iter().all(|(&i, &vi)| {
        vi.contains(i)
            && views.values().all(|&vj| {
                (vi.is_subset(vj) || vj.is_subset(vi)) && (!vj.contains(i) || vi.is_subset(vj))
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_memory_scans_empty() {
        let mut m: SnapshotMemory<u32> = SnapshotMemory::new(3);
        assert_eq!(m.scan(), vec![None, None, None]);
        m.update(ProcessId::of(2), 7);
        assert_eq!(m.scan(), vec![None, Some(7), None]);
    }

    #[test]
    fn solo_and_shared_blocks() {
        let mut o = ISObject::new();
        o.invoke(ProcessId::of(1), 10).unwrap();
        o.invoke(ProcessId::of(2), 20).unwrap();
        let out = o.resolve(ProcSet::from_ids([1, 2])).unwrap();
        assert_eq!(out.len(), 2);
        o.invoke(ProcessId::of(3), 30).unwrap();
        let out = o.resolve(ProcSet::from_ids([3])).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(
            o.partition().unwrap(),
            OrderedPartition::from_ids(&[&[1, 2], &[3]]).unwrap()
        );
    }

    #[test]
    fn double_invocation_is_rejected() {
        let mut o = ISObject::new();
        o.invoke(ProcessId::of(1), 1).unwrap();
        assert_eq!(
            o.invoke(ProcessId::of(1), 1),
            Err(RuntimeError::DoubleInvocation(ProcessId::of(1)))
        );
    }

    #[test]
    fn property_checker_rejects_incomparable_views() {
        let bad: BTreeMap<_, _> = [
            (ProcessId::of(1), ProcSet::from_ids([1])),
            (ProcessId::of(2), ProcSet::from_ids([2])),
        ]
        .into();
        assert!(!is_properties_hold(&bad));
        let no_immediacy: BTreeMap<_, _> = [
            (ProcessId::of(1), ProcSet::from_ids([1, 2, 3])),
            (ProcessId::of(2), ProcSet::from_ids([1, 2])),
            (ProcessId::of(3), ProcSet::from_ids([1, 2, 3])),
        ]
        .into();
        assert!(!is_properties_hold(&no_immediacy));
    }
}
