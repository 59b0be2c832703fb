//! Measurement scenarios, deterministic assignments, and polytope vertices.
//!
//! A *scenario* lists, per party, how many two-outcome measurement settings
//! that party has — `[2, 2]` is the CHSH scenario, `[4, 4]` the four-setting
//! two-party one. A deterministic local model assigns an outcome in `{-1,+1}`
//! to every setting of every party; the full-correlation feature vector of
//! such an assignment is the flattened outer product of the per-party
//! outcome vectors, and these feature vectors are exactly the vertices of
//! the correlation polytope.
//!
//! Enumeration order is part of the crate's contract: assignments are
//! indexed by a codeword `w` in `0..2^(total settings)`, where slot `i`
//! (party 0's settings first, most significant first) reads `+1` when bit
//! `total - 1 - i` of `w` is zero. Codeword 0 is the all-`+1` assignment,
//! and witness vertices reported by certifiers are always the first match
//! in this order, making reports reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exhaustive vertex enumeration walks `2^total_settings` assignments; this
/// cap keeps that loop (and everything built on it) tractable.
pub const MAX_TOTAL_SETTINGS: usize = 24;

/// A measurement scenario: per-party setting counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Scenario(Vec<usize>);

impl Scenario {
    /// Builds a scenario from per-party setting counts; every party needs
    /// at least one setting.
    pub fn new(settings: Vec<usize>) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::InvalidInput("scenario with no parties".into()));
        }
        if settings.iter().any(|&m| m == 0) {
            return Err(Error::InvalidInput(format!(
                "scenario {settings:?} has a party with zero settings"
            )));
        }
        Ok(Self(settings))
    }

    /// Number of parties.
    pub fn parties(&self) -> usize {
        self.0.len()
    }

    /// Per-party setting counts.
    pub fn settings(&self) -> &[usize] {
        &self.0
    }

    /// Dimension of correlation space: the product of the setting counts.
    /// One coefficient per joint setting choice.
    pub fn dimension(&self) -> usize {
        self.0.iter().product()
    }

    /// Total number of settings across all parties.
    pub fn total_settings(&self) -> usize {
        self.0.iter().sum()
    }

    /// Row-major strides of the coefficient tensor (party 0 slowest).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.parties()];
        for p in (0..self.parties().saturating_sub(1)).rev() {
            strides[p] = strides[p + 1] * self.0[p + 1];
        }
        strides
    }

    /// Errors unless the scenario is small enough for exhaustive vertex
    /// enumeration.
    pub fn ensure_enumerable(&self) -> Result<()> {
        let sum = self.total_settings();
        if sum > MAX_TOTAL_SETTINGS {
            return Err(Error::ScenarioTooLarge {
                sum,
                limit: MAX_TOTAL_SETTINGS,
            });
        }
        Ok(())
    }

    /// Number of deterministic assignments, `2^total_settings`.
    pub fn assignment_count(&self) -> Result<usize> {
        self.ensure_enumerable()?;
        Ok(1usize << self.total_settings())
    }

    /// The deterministic assignment at `codeword` in the crate's canonical
    /// enumeration order.
    pub fn assignment(&self, codeword: usize) -> Vertex {
        let total = self.total_settings();
        debug_assert!(codeword < (1usize << total));
        let mut assignments = Vec::with_capacity(self.parties());
        let mut offset = 0usize;
        for &m in &self.0 {
            let party: Vec<i8> = (0..m)
                .map(|s| sign_of_bit(codeword, total, offset + s))
                .collect();
            assignments.push(party);
            offset += m;
        }
        Vertex { assignments }
    }

    /// Iterates every deterministic assignment in canonical order.
    pub fn assignments(&self) -> Result<impl Iterator<Item = Vertex> + '_> {
        let count = self.assignment_count()?;
        Ok((0..count).map(move |w| self.assignment(w)))
    }
}

impl TryFrom<Vec<usize>> for Scenario {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Scenario::new(v)
    }
}

impl From<Scenario> for Vec<usize> {
    fn from(s: Scenario) -> Vec<usize> {
        s.0
    }
}

fn sign_of_bit(codeword: usize, width: usize, slot: usize) -> i8 {
    if codeword >> (width - 1 - slot) & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Enumerates the `2^k` sign vectors of length `k` in canonical order:
/// `(1,..,1)` first, the all-`-1` vector last, earlier entries most
/// significant. These are the *admissible vectors* a new party can
/// contribute to a transformation matrix.
pub fn admissible_vectors(k: usize) -> impl Iterator<Item = Vec<i8>> {
    assert!(k < usize::BITS as usize, "admissible vector length too large");
    (0..(1usize << k)).map(move |w| (0..k).map(|i| sign_of_bit(w, k, i)).collect())
}

/// A deterministic local assignment: one `+-1` outcome per setting per
/// party. Serves both as polytope-vertex witness and as input vector to
/// extension-matrix instantiation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex {
    assignments: Vec<Vec<i8>>,
}

impl Vertex {
    /// Builds a vertex from per-party outcome vectors; entries must be
    /// `+-1` and the shape must match `scenario`.
    pub fn new(scenario: &Scenario, assignments: Vec<Vec<i8>>) -> Result<Self> {
        if assignments.len() != scenario.parties()
            || assignments
                .iter()
                .zip(scenario.settings())
                .any(|(a, &m)| a.len() != m)
        {
            return Err(Error::ShapeMismatch(format!(
                "assignment shape {:?} does not match scenario {:?}",
                assignments.iter().map(Vec::len).collect::<Vec<_>>(),
                scenario.settings()
            )));
        }
        if assignments.iter().flatten().any(|&x| x != 1 && x != -1) {
            return Err(Error::InvalidInput(
                "assignment entries must be +-1".into(),
            ));
        }
        Ok(Self { assignments })
    }

    /// Per-party outcome vectors.
    pub fn parties(&self) -> &[Vec<i8>] {
        &self.assignments
    }

    /// Outcome vector of one party.
    pub fn party(&self, p: usize) -> &[i8] {
        &self.assignments[p]
    }

    /// The correlation feature vector: flattened outer product of the
    /// per-party outcome vectors, party 0 slowest — entry `(s_1,..,s_n)`
    /// is the product of the chosen outcomes.
    pub fn features(&self) -> Vec<i8> {
        let mut feats = vec![1i8];
        for party in &self.assignments {
            let mut next = Vec::with_capacity(feats.len() * party.len());
            for &f in &feats {
                for &x in party {
                    next.push(f * x);
                }
            }
            feats = next;
        }
        feats
    }
}

impl std::fmt::Display for Vertex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for party in &self.assignments {
            write!(f, "(")?;
            for (i, x) in party.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x:+}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}
