//! Exact certification against the correlation polytope: validity and
//! tightness (facet) checks, plus the fraction-free rank machinery they
//! rest on.
//!
//! An inequality is *valid* when no deterministic assignment exceeds the
//! bound, and *tight* when, in addition, the distinct feature vectors that
//! meet the bound exactly span the full correlation space — linear rank
//! equal to the scenario dimension. (The bound is positive, so the
//! saturating hyperplane avoids the origin and linear span is the right
//! notion; no affine bookkeeping is needed.)
//!
//! All arithmetic here is exact. Rank is computed by incremental
//! fraction-free Gaussian elimination over integers with gcd normalization
//! after every elimination step, so no rounding ever enters a verdict.

use std::collections::HashSet;

use num::bigint::BigInt;
use num::{Integer, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequality::BellInequality;
use crate::rational::Rational;
use crate::scenario::Vertex;

/// Incremental exact rank accumulator over integer rows.
///
/// Rows are reduced against a growing echelon basis by cross-multiplication
/// (`row <- b[j]*row - row[j]*b`), which stays in integers; each reduction
/// divides the row by the gcd of its entries to keep magnitudes small.
#[derive(Debug, Clone)]
pub struct RankBasis {
    width: usize,
    /// Echelon rows paired with their pivot column, sorted by pivot column.
    rows: Vec<(usize, Vec<BigInt>)>,
}

impl RankBasis {
    /// An empty basis for rows of length `width`.
    pub fn new(width: usize) -> Self {
        Self {
            width,
            rows: Vec::new(),
        }
    }

    /// Current rank.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Whether the basis already spans the full `width`-dimensional space.
    pub fn is_full(&self) -> bool {
        self.rows.len() == self.width
    }

    /// Reduces `row` against the basis and inserts what remains; returns
    /// whether the rank grew.
    pub fn insert(&mut self, mut row: Vec<BigInt>) -> bool {
        assert_eq!(row.len(), self.width, "row width mismatch");
        if self.is_full() {
            return false;
        }
        for (pivot, basis_row) in &self.rows {
            let r_at_pivot = std::mem::take(&mut row[*pivot]);
            if r_at_pivot.is_zero() {
                row[*pivot] = r_at_pivot;
                continue;
            }
            let b_at_pivot = basis_row[*pivot].clone();
            for (r, b) in row.iter_mut().zip(basis_row) {
                *r = &*r * &b_at_pivot - b * &r_at_pivot;
            }
            debug_assert!(row[*pivot].is_zero());
            normalize_gcd(&mut row);
        }
        match row.iter().position(|x| !x.is_zero()) {
            None => false,
            Some(pivot) => {
                let at = self
                    .rows
                    .partition_point(|(p, _)| *p < pivot);
                self.rows.insert(at, (pivot, row));
                true
            }
        }
    }
}

/// Divides a row by the gcd of its entries (no-op for zero rows).
fn normalize_gcd(row: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for x in row.iter() {
        if !x.is_zero() {
            g = g.gcd(x);
            if g == BigInt::from(1) {
                return;
            }
        }
    }
    if g.is_zero() || g == BigInt::from(1) {
        return;
    }
    for x in row.iter_mut() {
        *x = &*x / &g;
    }
}

/// Exact linear rank of a set of integer rows.
pub fn rank_exact(rows: &[Vec<BigInt>]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Ok(0);
    };
    let width = first.len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::ShapeMismatch(
            "rank input rows have differing lengths".into(),
        ));
    }
    let mut basis = RankBasis::new(width);
    for row in rows {
        basis.insert(row.clone());
        if basis.is_full() {
            break;
        }
    }
    Ok(basis.rank())
}

/// Exact rank of `+-1`/small-integer sign rows (feature vectors).
pub fn rank_of_signs<R: AsRef<[i8]>>(rows: &[R]) -> Result<usize> {
    let as_big: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| r.as_ref().iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    rank_exact(&as_big)
}

/// Outcome of [`check_validity`]: the exhaustive classical maximum and the
/// first assignment (in canonical enumeration order) attaining it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub max: Rational,
    pub witness: Vertex,
}

/// Outcome of [`check_tightness`]. `saturating` counts *distinct* feature
/// vectors meeting the bound exactly; `tight` means valid with saturating
/// rank equal to the scenario dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub valid: bool,
    pub saturating: usize,
    pub rank: usize,
    pub dimension: usize,
    pub tight: bool,
}

/// Exhaustive classical maximum together with its first witness
/// assignment. Deterministic: ties resolve to the smallest codeword.
pub fn classical_argmax(ineq: &BellInequality) -> Result<(Rational, Vertex)> {
    let scenario = ineq.scenario();
    let count = scenario.assignment_count()?;
    let best = (0..count)
        .into_par_iter()
        .map(|w| (ineq.evaluate_features(&scenario.assignment(w).features()), w))
        .reduce_with(|a, b| {
            use std::cmp::Ordering;
            match a.0.cmp(&b.0) {
                Ordering::Greater => a,
                Ordering::Less => b,
                Ordering::Equal => {
                    if a.1 <= b.1 {
                        a
                    } else {
                        b
                    }
                }
            }
        })
        .expect("scenario has at least one assignment");
    Ok((best.0, scenario.assignment(best.1)))
}

/// Checks validity: no deterministic assignment may exceed the bound. The
/// report carries the exhaustive maximum and its first witness — for an
/// invalid inequality, that witness is a violating assignment.
pub fn check_validity(ineq: &BellInequality) -> Result<ValidityReport> {
    let (max, witness) = classical_argmax(ineq)?;
    let valid = max <= *ineq.bound();
    Ok(ValidityReport {
        valid,
        max,
        witness,
    })
}

/// Certifies tightness: scans every assignment, collects the distinct
/// feature vectors that saturate the bound, and compares their exact rank
/// with the scenario dimension. Invalid inequalities report
/// `valid: false, tight: false` (saturation data still filled in).
pub fn check_tightness(ineq: &BellInequality) -> Result<TightnessReport> {
    let scenario = ineq.scenario();
    let count = scenario.assignment_count()?;
    let bound = ineq.bound().clone();
    let dimension = scenario.dimension();

    let (max, saturating_set) = (0..count)
        .into_par_iter()
        .fold(
            || (None::<Rational>, HashSet::<Vec<i8>>::new()),
            |(mut max, mut sat), w| {
                let features = scenario.assignment(w).features();
                let value = ineq.evaluate_features(&features);
                if value == bound {
                    sat.insert(features);
                }
                if max.as_ref().is_none_or(|m| value > *m) {
                    max = Some(value);
                }
                (max, sat)
            },
        )
        .reduce(
            || (None, HashSet::new()),
            |(max_a, mut sat_a), (max_b, sat_b)| {
                let max = match (max_a, max_b) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                sat_a.extend(sat_b);
                (max, sat_a)
            },
        );

    let max = max.expect("scenario has at least one assignment");
    let valid = max <= bound;
    let saturating: Vec<Vec<i8>> = saturating_set.into_iter().collect();
    let rank = rank_of_signs(&saturating)?;
    Ok(TightnessReport {
        valid,
        saturating: saturating.len(),
        rank,
        dimension,
        tight: valid && rank == dimension,
    })
}
