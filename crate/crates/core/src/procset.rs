//! Process identifiers and small process sets.
//!
//! Processes are numbered `1..=n` and the id doubles as the vertex color of
//! the standard simplex. Sets are bitmasks; everything in this crate works
//! with `n <= MAX_PROCESSES`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

pub const MAX_PROCESSES: usize = 16;

/// A process id in `1..=MAX_PROCESSES`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(u8);

impl ProcessId {
    pub fn new(id: usize) -> Option<Self> {
        (1..=MAX_PROCESSES).contains(&id).then_some(Self(id as u8))
    }

    /// Panics when `id` is out of range; for call sites that iterate `1..=n`.
    pub fn of(id: usize) -> Self {
        Self::new(id).unwrap_or_else(|| panic!("process id {id} out of range"))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Zero-based slot index.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all(n: usize) -> impl Iterator<Item = ProcessId> {
        (1..=n).map(ProcessId::of)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A set of processes. Ordered by the lexicographic order of the sorted
/// member lists, which is the order used for deterministic enumeration.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ProcSet(u16);

impl ProcSet {
    pub const EMPTY: ProcSet = ProcSet(0);

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_PROCESSES);
        if n == MAX_PROCESSES {
            Self(u16::MAX)
        } else {
            Self((1u16 << n) - 1)
        }
    }

    pub fn singleton(p: ProcessId) -> Self {
        Self(1 << p.index())
    }

    pub fn from_bits(bits: u16) -> Self {
        Self(bits)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn contains(self, p: ProcessId) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn insert(&mut self, p: ProcessId) {
        self.0 |= 1 << p.index();
    }

    pub fn remove(&mut self, p: ProcessId) {
        self.0 &= !(1 << p.index());
    }

    pub fn with(mut self, p: ProcessId) -> Self {
        self.insert(p);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        Self(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        Self(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn min(self) -> Option<ProcessId> {
        (self.0 != 0).then(|| ProcessId(self.0.trailing_zeros() as u8 + 1))
    }

    pub fn iter(self) -> impl Iterator<Item = ProcessId> {
        let bits = self.0;
        (0..MAX_PROCESSES)
            .filter(move |i| bits & (1 << i) != 0)
            .map(|i| ProcessId(i as u8 + 1))
    }

    pub fn to_vec(self) -> Vec<ProcessId> {
        self.iter().collect()
    }

    /// All nonempty subsets, in increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = ProcSet> {
        let bits = self.0;
        // Enumerate submasks in ascending order.
        (1..=bits as u32)
            .map(|b| b as u16)
            .filter(move |b| b & !bits == 0)
            .map(ProcSet)
    }

    pub fn from_ids<I: IntoIterator<Item = usize>>(ids: I) -> Self {
        ids.into_iter().map(ProcessId::of).collect()
    }
}

impl FromIterator<ProcessId> for ProcSet {
    fn from_iter<T: IntoIterator<Item = ProcessId>>(iter: T) -> Self {
        let mut s = ProcSet::EMPTY;
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl Ord for ProcSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for ProcSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ProcSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ProcSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", p.get())?;
        }
        f.write_str("}")
    }
}

impl Serialize for ProcSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let ids: Vec<usize> = self.iter().map(ProcessId::get).collect();
        ids.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProcSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let ids = Vec::<usize>::deserialize(d)?;
        let mut s = ProcSet::EMPTY;
        for id in ids {
            let p = ProcessId::new(id)
                .ok_or_else(|| serde::de::Error::custom(format!("process id {id} out of range")))?;
            s.insert(p);
        }
        Ok(s)
    }
}
