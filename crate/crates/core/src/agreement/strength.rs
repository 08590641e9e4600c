use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AgreementError, Variant, GOLD_THRESHOLD};

/// Landis & Koch band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgreementBand {
    #[serde(rename = "almost perfect")]
    AlmostPerfect,
    #[serde(rename = "substantial")]
    Substantial,
    #[serde(rename = "moderate")]
    Moderate,
    #[serde(rename = "below moderate")]
    BelowModerate,
}

impl fmt::Display for AgreementBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgreementBand::AlmostPerfect => "almost perfect",
            AgreementBand::Substantial => "substantial",
            AgreementBand::Moderate => "moderate",
            AgreementBand::BelowModerate => "below moderate",
        })
    }
}

/// Reliability threshold used in computational linguistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reliability {
    Good,
    Tolerable,
    Low,
}

impl fmt::Display for Reliability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reliability::Good => "good",
            Reliability::Tolerable => "tolerable",
            Reliability::Low => "low",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strength {
    pub band: AgreementBand,
    pub reliability: Reliability,
}

pub fn strength_label(value: f64) -> Result<Strength, AgreementError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(AgreementError::OutOfRange(value));
    }
    let band = if value >= 0.81 {
        AgreementBand::AlmostPerfect
    } else if value >= 0.61 {
        AgreementBand::Substantial
    } else if value >= 0.41 {
        AgreementBand::Moderate
    } else {
        AgreementBand::BelowModerate
    };
    let reliability = if value >= 0.8 {
        Reliability::Good
    } else if value > 0.67 {
        Reliability::Tolerable
    } else {
        Reliability::Low
    };
    Ok(Strength { band, reliability })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentLabel {
    Gold,
    Platinum,
}

impl SegmentLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SegmentLabel::Gold => "gold",
            SegmentLabel::Platinum => "platinum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gold" => Some(SegmentLabel::Gold),
            "platinum" => Some(SegmentLabel::Platinum),
            _ => None,
        }
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gold when the document's agreement is strictly above `threshold`.
pub fn segment(doc_iaa: Option<f64>, threshold: f64) -> Result<SegmentLabel, AgreementError> {
    let value = doc_iaa.ok_or(AgreementError::Undefined)?;
    Ok(if value > threshold {
        SegmentLabel::Gold
    } else {
        SegmentLabel::Platinum
    })
}

/// Which variant and threshold split the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub variant: Variant,
    pub threshold: f64,
}

impl Default for Segmentation {
    fn default() -> Self {
        Self {
            variant: Variant::Strict,
            threshold: GOLD_THRESHOLD,
        }
    }
}
