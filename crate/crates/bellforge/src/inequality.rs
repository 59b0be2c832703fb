//! Full-correlation Bell inequalities and their exact evaluation.
//!
//! An inequality is a rational coefficient tensor `F` over the joint
//! settings of a scenario together with a positive bound `B`, asserting
//! `sum_s F_s * E(s) <= B` for local hidden-variable models, where `E(s)`
//! is the full correlator at joint setting `s`. Coefficients are stored
//! flat in row-major order (party 0 slowest), matching
//! [`Vertex::features`](crate::scenario::Vertex::features).
//!
//! The JSON form is the crate's interchange format:
//!
//! ```json
//! {"name":"CHSH","scenario":[2,2],"coeffs":["1/2","1/2","1/2","-1/2"],"bound":"1"}
//! ```

use num::bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{lcm_of_denominators, Rational};
use crate::scenario::{Scenario, Vertex};

/// A full-correlation Bell inequality `sum_s F_s E(s) <= bound`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InequalityData")]
pub struct BellInequality {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    scenario: Scenario,
    coeffs: Vec<Rational>,
    bound: Rational,
}

/// Raw mirror of the JSON shape; validated into [`BellInequality`].
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InequalityData {
    #[serde(default)]
    name: Option<String>,
    scenario: Scenario,
    coeffs: Vec<Rational>,
    bound: Rational,
}

impl TryFrom<InequalityData> for BellInequality {
    type Error = Error;
    fn try_from(raw: InequalityData) -> Result<Self> {
        BellInequality::new(raw.name, raw.scenario, raw.coeffs, raw.bound)
    }
}

impl BellInequality {
    /// Builds an inequality, checking the structural invariants: the
    /// coefficient count must equal the scenario dimension, the bound must
    /// be positive, and at least one coefficient must be nonzero.
    pub fn new(
        name: Option<String>,
        scenario: Scenario,
        coeffs: Vec<Rational>,
        bound: Rational,
    ) -> Result<Self> {
        if coeffs.len() != scenario.dimension() {
            return Err(Error::InvalidInequality(format!(
                "{} coefficients for scenario {:?} of dimension {}",
                coeffs.len(),
                scenario.settings(),
                scenario.dimension()
            )));
        }
        if !bound.is_positive() {
            return Err(Error::InvalidInequality(format!(
                "bound must be positive, got {bound}"
            )));
        }
        if coeffs.iter().all(Rational::is_zero) {
            return Err(Error::InvalidInequality(
                "all coefficients are zero".into(),
            ));
        }
        Ok(Self {
            name,
            scenario,
            coeffs,
            bound,
        })
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Returns the same inequality carrying `name`.
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Returns the same inequality with no name.
    pub fn unnamed(mut self) -> Self {
        self.name = None;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn bound(&self) -> &Rational {
        &self.bound
    }

    /// Value of the functional at a deterministic assignment.
    pub fn evaluate(&self, vertex: &Vertex) -> Result<Rational> {
        if vertex.parties().len() != self.scenario.parties()
            || vertex
                .parties()
                .iter()
                .zip(self.scenario.settings())
                .any(|(a, &m)| a.len() != m)
        {
            return Err(Error::ShapeMismatch(format!(
                "vertex shape {:?} does not match scenario {:?}",
                vertex.parties().iter().map(Vec::len).collect::<Vec<_>>(),
                self.scenario.settings()
            )));
        }
        Ok(self.evaluate_features(&vertex.features()))
    }

    /// Dot product of the coefficients with a `+-1` feature vector.
    pub(crate) fn evaluate_features(&self, features: &[i8]) -> Rational {
        debug_assert_eq!(features.len(), self.coeffs.len());
        let mut acc = Rational::zero();
        for (c, &f) in self.coeffs.iter().zip(features) {
            if c.is_zero() {
                continue;
            }
            if f > 0 {
                acc += c;
            } else {
                acc -= c;
            }
        }
        acc
    }

    /// The no-signalling algebraic maximum `sum_s |F_s|`, attained when
    /// every correlator is pushed to its own sign.
    pub fn algebraic_max(&self) -> Rational {
        self.coeffs.iter().map(Rational::abs).sum()
    }

    /// The local-hidden-variable maximum: the largest value over all
    /// deterministic assignments (exhaustive, exact).
    pub fn classical_max(&self) -> Result<Rational> {
        Ok(crate::polytope::classical_argmax(self)?.0)
    }

    /// Multiplies coefficients and bound by the least common multiple of
    /// their denominators, producing the integer presentation of the same
    /// inequality. Display-level only: certification and canonicalization
    /// are scale-invariant.
    pub fn scale_to_integer(&self) -> Self {
        let lcm = lcm_of_denominators(self.coeffs.iter().chain([&self.bound]));
        if lcm == BigInt::from(1) {
            return self.clone();
        }
        let factor = Rational::from(lcm);
        Self {
            name: self.name.clone(),
            scenario: self.scenario.clone(),
            coeffs: self.coeffs.iter().map(|c| c * &factor).collect(),
            bound: &self.bound * &factor,
        }
    }

    /// Parses the JSON interchange form.
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Serializes to the JSON interchange form.
    pub fn to_json(&self, pretty: bool) -> String {
        if pretty {
            serde_json::to_string_pretty(self).expect("inequality serializes")
        } else {
            serde_json::to_string(self).expect("inequality serializes")
        }
    }
}
