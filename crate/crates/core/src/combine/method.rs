use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::RegressorKind;
use crate::error::Error;

/// Combination methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodTag {
    /// Best individual model on the fit set.
    #[serde(rename = "BI")]
    Bi,
    /// Naive sorting of the pooled quantiles.
    #[serde(rename = "NS")]
    Ns,
    /// Median of the models' quantiles at each level.
    #[serde(rename = "MED")]
    Med,
    /// Simple average.
    #[serde(rename = "SA")]
    Sa,
    /// Inverse-loss weighted average.
    #[serde(rename = "WA")]
    Wa,
    #[serde(rename = "QRA-E")]
    QraE,
    #[serde(rename = "QRA-A")]
    QraA,
    #[serde(rename = "QRA-T")]
    QraT,
    #[serde(rename = "CQRA-E")]
    CqraE,
    #[serde(rename = "CQRA-A")]
    CqraA,
    #[serde(rename = "CQRA-T")]
    CqraT,
    /// One simplex weight vector shared by every level.
    #[serde(rename = "CQRA-SHARED")]
    CqraShared,
}

impl MethodTag {
    pub const ALL: [MethodTag; 12] = [
        MethodTag::Bi,
        MethodTag::Ns,
        MethodTag::Med,
        MethodTag::Sa,
        MethodTag::Wa,
        MethodTag::QraE,
        MethodTag::QraA,
        MethodTag::QraT,
        MethodTag::CqraE,
        MethodTag::CqraA,
        MethodTag::CqraT,
        MethodTag::CqraShared,
    ];

    /// Methods in report order.
    pub const REPORT: [MethodTag; 11] = [
        MethodTag::Bi,
        MethodTag::Ns,
        MethodTag::Med,
        MethodTag::Sa,
        MethodTag::Wa,
        MethodTag::QraE,
        MethodTag::QraA,
        MethodTag::QraT,
        MethodTag::CqraE,
        MethodTag::CqraA,
        MethodTag::CqraT,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Bi => "BI",
            MethodTag::Ns => "NS",
            MethodTag::Med => "MED",
            MethodTag::Sa => "SA",
            MethodTag::Wa => "WA",
            MethodTag::QraE => "QRA-E",
            MethodTag::QraA => "QRA-A",
            MethodTag::QraT => "QRA-T",
            MethodTag::CqraE => "CQRA-E",
            MethodTag::CqraA => "CQRA-A",
            MethodTag::CqraT => "CQRA-T",
            MethodTag::CqraShared => "CQRA-SHARED",
        }
    }

    /// Whether fitted models of this method carry a weight profile.
    pub fn needs_profile(self) -> bool {
        !matches!(self, MethodTag::Ns | MethodTag::Med)
    }

    /// Regressor kind and simplex constraint of the per-level regression
    /// methods.
    pub fn regression(self) -> Option<(RegressorKind, bool)> {
        match self {
            MethodTag::QraE => Some((RegressorKind::Averaged, false)),
            MethodTag::QraA => Some((RegressorKind::All, false)),
            MethodTag::QraT => Some((RegressorKind::Targeted, false)),
            MethodTag::CqraE => Some((RegressorKind::Averaged, true)),
            MethodTag::CqraA => Some((RegressorKind::All, true)),
            MethodTag::CqraT => Some((RegressorKind::Targeted, true)),
            _ => None,
        }
    }

    /// Position in [`MethodTag::REPORT`]; `CQRA-SHARED` sorts last.
    pub fn report_rank(self) -> usize {
        MethodTag::REPORT
            .iter()
            .position(|&m| m == self)
            .unwrap_or(MethodTag::REPORT.len())
    }

    /// Parses a comma-separated list, rejecting duplicates.
    pub fn parse_list(list: &str) -> Result<Vec<MethodTag>, Error> {
        let mut out = Vec::new();
        for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let tag: MethodTag = part.parse()?;
            if out.contains(&tag) {
                return Err(Error::parameter("methods", format!("{tag} listed twice")));
            }
            out.push(tag);
        }
        if out.is_empty() {
            return Err(Error::parameter("methods", "no methods given"));
        }
        Ok(out)
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    /// Case-insensitive; `_` and `-` are interchangeable.
    fn from_str(s: &str) -> Result<Self, Error> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        MethodTag::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::parameter("method", format!("unknown method `{s}`")))
    }
}
