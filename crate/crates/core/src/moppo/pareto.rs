//! Dominance (maximization) and a non-dominated archive of outcomes.

use serde::{Deserialize, Serialize};

/// `p` dominates `q`: no worse anywhere and strictly better somewhere.
pub fn dominates(p: [f64; 2], q: [f64; 2]) -> bool {
    p[0] >= q[0] && p[1] >= q[1] && (p[0] > q[0] || p[1] > q[1])
}

/// Indices-preserving non-dominated subset (O(n^2)). Exact duplicates are
/// all kept since none dominates another.
pub fn pareto_front(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(*q, **p)))
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub coverage: f64,
    pub capacity: f64,
    pub strategy: String,
    pub seed: u64,
    /// Preference or evaluation label the point came from.
    pub preference: String,
    pub config_hash: String,
}

impl ArchiveEntry {
    pub fn point(&self) -> [f64; 2] {
        [self.coverage, self.capacity]
    }
}

/// Mutually non-dominated outcomes. Inserting a point that duplicates an
/// existing one is a no-op.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the entry was kept.
    pub fn insert(&mut self, e: ArchiveEntry) -> bool {
        let p = e.point();
        if !(p[0].is_finite() && p[1].is_finite()) {
            return false;
        }
        if self.entries.iter().any(|x| dominates(x.point(), p) || x.point() == p) {
            return false;
        }
        self.entries.retain(|x| !dominates(p, x.point()));
        self.entries.push(e);
        true
    }

    pub fn extend(&mut self, it: impl IntoIterator<Item = ArchiveEntry>) {
        for e in it {
            self.insert(e);
        }
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Best coverage and best capacity over the archive.
    pub fn ideal_point(&self) -> Option<[f64; 2]> {
        if self.entries.is_empty() {
            return None;
        }
        Some(self.entries.iter().fold([f64::NEG_INFINITY; 2], |acc, e| {
            [acc[0].max(e.coverage), acc[1].max(e.capacity)]
        }))
    }

    pub fn is_mutually_non_dominated(&self) -> bool {
        self.entries.iter().all(|a| {
            self.entries.iter().all(|b| !dominates(a.point(), b.point()))
        })
    }
}
