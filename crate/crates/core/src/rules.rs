//! Mark-up decision rules `h(x, y) = ε (x - (1 + a) y)`.
//!
//! A rule fires (disclosure) when `h >= 0`. Rules are time-independent; a
//! time-indexed family would replace `markup` and `signature` with schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of the news a rule reacts to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Signature {
    /// `ε = +1`: disclose when the observation is high enough.
    Good,
    /// `ε = -1`: disclose when the observation is low enough.
    Bad,
}

impl Signature {
    pub fn sign(self) -> f64 {
        match self {
            Signature::Good => 1.0,
            Signature::Bad => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Signature::Good => Signature::Bad,
            Signature::Bad => Signature::Good,
        }
    }
}

impl TryFrom<i8> for Signature {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Signature::Good),
            -1 => Ok(Signature::Bad),
            other => Err(format!("signature must be +1 or -1, got {other}")),
        }
    }
}

impl From<Signature> for i8 {
    fn from(s: Signature) -> i8 {
        match s {
            Signature::Good => 1,
            Signature::Bad => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule")]
pub struct DecisionRule {
    signature: Signature,
    markup: f64,
}

#[derive(Deserialize)]
struct RawRule {
    signature: Signature,
    markup: f64,
}

impl TryFrom<RawRule> for DecisionRule {
    type Error = Error;

    fn try_from(raw: RawRule) -> Result<Self> {
        DecisionRule::new(raw.signature, raw.markup)
    }
}

impl DecisionRule {
    /// Fails unless `markup > -1`.
    pub fn new(signature: Signature, markup: f64) -> Result<Self> {
        if !(markup.is_finite() && markup > -1.0) {
            return Err(Error::validation(
                "markup",
                format!("mark-up must be finite and > -1, got {markup}"),
            ));
        }
        Ok(DecisionRule { signature, markup })
    }

    pub fn good(markup: f64) -> Result<Self> {
        Self::new(Signature::Good, markup)
    }

    pub fn bad(markup: f64) -> Result<Self> {
        Self::new(Signature::Bad, markup)
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn markup(&self) -> f64 {
        self.markup
    }

    pub fn with_markup(&self, markup: f64) -> Result<Self> {
        Self::new(self.signature, markup)
    }

    /// `ε (x - (1 + a) y)`.
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.signature.sign() * (x - (1.0 + self.markup) * y)
    }

    /// Disclosure fires at indifference too.
    pub fn triggers(&self, x: f64, y: f64) -> bool {
        self.evaluate(x, y) >= 0.0
    }

    /// The unique `x` with `evaluate(x, y) == 0`.
    pub fn indifference_value(&self, y: f64) -> f64 {
        (1.0 + self.markup) * y
    }
}
