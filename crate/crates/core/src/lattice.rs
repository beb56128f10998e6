//! Finite security lattices.
//!
//! A lattice is built from its covering relation. Levels are stored sorted by
//! name so that every index-based ordering downstream agrees with the textual
//! one, independent of declaration order.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("duplicate level `{0}`")]
    DuplicateLevel(String),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("invalid level name `{0}` (expected [A-Za-z0-9_]+)")]
    InvalidName(String),
    #[error("order cycle between `{0}` and `{1}`")]
    OrderCycle(String, String),
    #[error("not a lattice: `{0}` and `{1}` have no unique {2}")]
    NotALattice(String, String, Bound),
    #[error("a lattice needs at least one level")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Upper,
    Lower,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Upper => f.write_str("least upper bound"),
            Bound::Lower => f.write_str("greatest lower bound"),
        }
    }
}

/// Handle to a level of one particular lattice.
///
/// Handles are dense indices in name order; comparing two handles compares
/// the level names, not the security order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(pub(crate) u16);

impl Level {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub(crate) fn valid_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityLattice {
    names: Vec<String>,
    index: HashMap<String, Level>,
    order: Vec<bool>,
    join: Vec<Level>,
    meet: Vec<Level>,
    top: Level,
    bottom: Level,
}

impl SecurityLattice {
    /// Builds a lattice from level names and covering pairs `(lower, upper)`.
    pub fn build<S: AsRef<str>>(names: &[S], covers: &[(S, S)]) -> Result<Self, LatticeError> {
        if names.is_empty() {
            return Err(LatticeError::Empty);
        }
        let mut sorted: Vec<String> = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            if !valid_ident(n) {
                return Err(LatticeError::InvalidName(n.to_string()));
            }
            sorted.push(n.to_string());
        }
        sorted.sort();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(LatticeError::DuplicateLevel(w[0].clone()));
            }
        }
        let n = sorted.len();
        assert!(n <= u16::MAX as usize, "too many levels");
        let index: HashMap<String, Level> = sorted
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), Level(i as u16)))
            .collect();
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| LatticeError::UnknownLevel(s.to_string()))
        };

        let mut order = vec![false; n * n];
        for i in 0..n {
            order[i * n + i] = true;
        }
        for (lo, hi) in covers {
            let lo = lookup(lo.as_ref())?;
            let hi = lookup(hi.as_ref())?;
            order[lo.index() * n + hi.index()] = true;
        }
        // Warshall closure.
        for k in 0..n {
            for i in 0..n {
                if order[i * n + k] {
                    for j in 0..n {
                        if order[k * n + j] {
                            order[i * n + j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if order[i * n + j] && order[j * n + i] {
                    return Err(LatticeError::OrderCycle(sorted[i].clone(), sorted[j].clone()));
                }
            }
        }

        let leq = |a: usize, b: usize| order[a * n + b];
        let mut join = vec![Level(0); n * n];
        let mut meet = vec![Level(0); n * n];
        for a in 0..n {
            for b in a..n {
                let lub = (0..n)
                    .filter(|&u| leq(a, u) && leq(b, u))
                    .find(|&u| (0..n).all(|v| !(leq(a, v) && leq(b, v)) || leq(u, v)))
                    .ok_or_else(|| {
                        LatticeError::NotALattice(sorted[a].clone(), sorted[b].clone(), Bound::Upper)
                    })?;
                let glb = (0..n)
                    .filter(|&l| leq(l, a) && leq(l, b))
                    .find(|&l| (0..n).all(|v| !(leq(v, a) && leq(v, b)) || leq(v, l)))
                    .ok_or_else(|| {
                        LatticeError::NotALattice(sorted[a].clone(), sorted[b].clone(), Bound::Lower)
                    })?;
                join[a * n + b] = Level(lub as u16);
                join[b * n + a] = Level(lub as u16);
                meet[a * n + b] = Level(glb as u16);
                meet[b * n + a] = Level(glb as u16);
            }
        }
        let top = (1..n).fold(Level(0), |acc, i| join[acc.index() * n + i]);
        let bottom = (1..n).fold(Level(0), |acc, i| meet[acc.index() * n + i]);
        Ok(SecurityLattice {
            names: sorted,
            index,
            order,
            join,
            meet,
            top,
            bottom,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// All levels in name order.
    pub fn levels(&self) -> impl ExactSizeIterator<Item = Level> + '_ {
        (0..self.names.len()).map(|i| Level(i as u16))
    }

    pub fn level(&self, name: &str) -> Result<Level, LatticeError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| LatticeError::UnknownLevel(name.to_string()))
    }

    pub fn name(&self, l: Level) -> &str {
        &self.names[l.index()]
    }

    pub fn top(&self) -> Level {
        self.top
    }

    pub fn bottom(&self) -> Level {
        self.bottom
    }

    pub fn leq(&self, a: Level, b: Level) -> bool {
        self.order[a.index() * self.len() + b.index()]
    }

    pub fn join(&self, a: Level, b: Level) -> Level {
        self.join[a.index() * self.len() + b.index()]
    }

    pub fn meet(&self, a: Level, b: Level) -> Level {
        self.meet[a.index() * self.len() + b.index()]
    }

    /// Least upper bound of a set; the empty join is bottom.
    pub fn join_all<I: IntoIterator<Item = Level>>(&self, levels: I) -> Level {
        levels.into_iter().fold(self.bottom, |acc, l| self.join(acc, l))
    }

    pub fn meet_all<I: IntoIterator<Item = Level>>(&self, levels: I) -> Level {
        levels.into_iter().fold(self.top, |acc, l| self.meet(acc, l))
    }

    pub fn leq_by_name(&self, a: &str, b: &str) -> Result<bool, LatticeError> {
        Ok(self.leq(self.level(a)?, self.level(b)?))
    }

    pub fn join_by_name(&self, a: &str, b: &str) -> Result<&str, LatticeError> {
        Ok(self.name(self.join(self.level(a)?, self.level(b)?)))
    }

    pub fn meet_by_name(&self, a: &str, b: &str) -> Result<&str, LatticeError> {
        Ok(self.name(self.meet(self.level(a)?, self.level(b)?)))
    }

    /// The covering (Hasse) pairs of the order, sorted by (lower, upper) name.
    pub fn covers(&self) -> Vec<(Level, Level)> {
        let mut out = Vec::new();
        for a in self.levels() {
            for b in self.levels() {
                if a == b || !self.leq(a, b) {
                    continue;
                }
                let direct = self
                    .levels()
                    .all(|c| c == a || c == b || !(self.leq(a, c) && self.leq(c, b)));
                if direct {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat2() -> SecurityLattice {
        SecurityLattice::build(&["Public", "Secret"], &[("Public", "Secret")]).unwrap()
    }

    fn latd() -> SecurityLattice {
        SecurityLattice::build(
            &["L", "A", "B", "H"],
            &[("L", "A"), ("L", "B"), ("A", "H"), ("B", "H")],
        )
        .unwrap()
    }

    #[test]
    fn two_chain() {
        let l = lat2();
        assert_eq!(l.name(l.top()), "Secret");
        assert_eq!(l.name(l.bottom()), "Public");
        assert!(l.leq_by_name("Public", "Secret").unwrap());
        assert!(!l.leq_by_name("Secret", "Public").unwrap());
        assert_eq!(l.join_by_name("Public", "Secret").unwrap(), "Secret");
        assert_eq!(l.meet_by_name("Public", "Secret").unwrap(), "Public");
    }

    #[test]
    fn diamond() {
        let l = latd();
        assert_eq!(l.join_by_name("A", "B").unwrap(), "H");
        assert_eq!(l.meet_by_name("A", "B").unwrap(), "L");
        assert!(!l.leq_by_name("A", "B").unwrap());
        assert!(!l.leq_by_name("B", "A").unwrap());
        for x in l.levels() {
            assert!(l.leq(x, x));
            assert_eq!(l.meet(x, x), x);
        }
        assert_eq!(l.join_all([]), l.bottom());
        assert_eq!(l.meet_all([]), l.top());
    }

    #[test]
    fn bowtie_is_rejected_with_first_pair() {
        let err = SecurityLattice::build(
            &["a", "b", "c", "d"],
            &[("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")],
        )
        .unwrap_err();
        assert_eq!(
            err,
            LatticeError::NotALattice("a".into(), "b".into(), Bound::Upper)
        );
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            SecurityLattice::build(&["a", "a"], &[]).unwrap_err(),
            LatticeError::DuplicateLevel("a".into())
        );
        assert_eq!(
            SecurityLattice::build(&["a"], &[("a", "z")]).unwrap_err(),
            LatticeError::UnknownLevel("z".into())
        );
        assert_eq!(
            SecurityLattice::build(&["a", "b"], &[("a", "b"), ("b", "a")]).unwrap_err(),
            LatticeError::OrderCycle("a".into(), "b".into())
        );
        assert!(matches!(
            SecurityLattice::build(&["a", "b"], &[]).unwrap_err(),
            LatticeError::NotALattice(_, _, _)
        ));
        assert_eq!(
            SecurityLattice::build::<&str>(&[], &[]).unwrap_err(),
            LatticeError::Empty
        );
        assert!(matches!(
            SecurityLattice::build(&["bad name"], &[]).unwrap_err(),
            LatticeError::InvalidName(_)
        ));
        assert!(matches!(
            lat2().leq_by_name("Public", "TopSecret"),
            Err(LatticeError::UnknownLevel(_))
        ));
    }

    #[test]
    fn covers_are_the_transitive_reduction() {
        let l = SecurityLattice::build(
            &["a", "b", "c"],
            &[("a", "b"), ("b", "c"), ("a", "c")],
        )
        .unwrap();
        let named: Vec<_> = l
            .covers()
            .into_iter()
            .map(|(x, y)| (l.name(x), l.name(y)))
            .collect();
        assert_eq!(named, vec![("a", "b"), ("b", "c")]);
    }

    #[test]
    fn case_sensitive() {
        let l = SecurityLattice::build(&["low", "Low"], &[("low", "Low")]).unwrap();
        assert_eq!(l.len(), 2);
        assert!(l.level("LOW").is_err());
    }
}
