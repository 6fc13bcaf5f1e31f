use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Per-frame Lung Ultrasound Score: 0 (normal aeration) to 3 (complete loss
/// of aeration).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SeverityScore(u8);

impl SeverityScore {
    pub const COUNT: usize = 4;
    pub const ALL: [SeverityScore; 4] = [
        SeverityScore(0),
        SeverityScore(1),
        SeverityScore(2),
        SeverityScore(3),
    ];

    pub fn new(value: u8) -> Option<Self> {
        (value < 4).then_some(SeverityScore(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Panics when `index >= 4`.
    pub fn from_index(index: usize) -> Self {
        assert!(index < 4, "severity index {index} out of range");
        SeverityScore(index as u8)
    }
}

impl TryFrom<u8> for SeverityScore {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        SeverityScore::new(value).ok_or_else(|| format!("severity score {value} not in 0..=3"))
    }
}

impl From<SeverityScore> for u8 {
    fn from(s: SeverityScore) -> u8 {
        s.0
    }
}

impl FromStr for SeverityScore {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "0" => Ok(SeverityScore(0)),
            "1" => Ok(SeverityScore(1)),
            "2" => Ok(SeverityScore(2)),
            "3" => Ok(SeverityScore(3)),
            other => Err(format!("invalid severity score {other:?}")),
        }
    }
}

impl fmt::Display for SeverityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
