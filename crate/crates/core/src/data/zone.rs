use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Anterior,
    Lateral,
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Superior,
    Inferior,
}

/// One of the 12 chest scanning zones, six per hemithorax.
///
/// Zones order as left before right, then anterior, lateral, posterior,
/// then superior before inferior, which is the row order of the patient
/// report table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Zone {
    pub side: Side,
    pub aspect: Aspect,
    pub level: Level,
}

impl Zone {
    pub const COUNT: usize = 12;

    pub const fn new(side: Side, aspect: Aspect, level: Level) -> Self {
        Zone {
            side,
            aspect,
            level,
        }
    }

    pub fn all() -> [Zone; 12] {
        let mut out = [Zone::new(Side::Left, Aspect::Anterior, Level::Superior); 12];
        let mut i = 0;
        for side in [Side::Left, Side::Right] {
            for aspect in [Aspect::Anterior, Aspect::Lateral, Aspect::Posterior] {
                for level in [Level::Superior, Level::Inferior] {
                    out[i] = Zone::new(side, aspect, level);
                    i += 1;
                }
            }
        }
        out
    }

    /// Position in [`Zone::all`].
    pub fn index(self) -> usize {
        let side = match self.side {
            Side::Left => 0,
            Side::Right => 1,
        };
        let aspect = match self.aspect {
            Aspect::Anterior => 0,
            Aspect::Lateral => 1,
            Aspect::Posterior => 2,
        };
        let level = match self.level {
            Level::Superior => 0,
            Level::Inferior => 1,
        };
        side * 6 + aspect * 2 + level
    }

    pub fn from_index(index: usize) -> Zone {
        Zone::all()[index]
    }

    /// Canonical manifest spelling, e.g. `left_anterior_superior`.
    pub fn name(self) -> &'static str {
        const NAMES: [&str; 12] = [
            "left_anterior_superior",
            "left_anterior_inferior",
            "left_lateral_superior",
            "left_lateral_inferior",
            "left_posterior_superior",
            "left_posterior_inferior",
            "right_anterior_superior",
            "right_anterior_inferior",
            "right_lateral_superior",
            "right_lateral_inferior",
            "right_posterior_superior",
            "right_posterior_inferior",
        ];
        NAMES[self.index()]
    }

    /// Human-readable label, e.g. `Left Anterior Superior`.
    pub fn title(self) -> String {
        self.name()
            .split('_')
            .map(|w| {
                let mut c = w.chars();
                match c.next() {
                    Some(first) => first.to_ascii_uppercase().to_string() + c.as_str(),
                    None => String::new(),
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Zone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Zone::all()
            .into_iter()
            .find(|z| z.name() == s)
            .ok_or_else(|| format!("unknown zone {s:?}"))
    }
}

impl From<Zone> for String {
    fn from(z: Zone) -> String {
        z.name().to_string()
    }
}

impl TryFrom<String> for Zone {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn twelve_distinct_zones() {
        let set: BTreeSet<Zone> = Zone::all().into_iter().collect();
        assert_eq!(set.len(), 12);
        let names: BTreeSet<&str> = Zone::all().iter().map(|z| z.name()).collect();
        assert_eq!(names.len(), 12);
    }

    #[test]
    fn index_round_trips_and_matches_ordering() {
        for (i, z) in Zone::all().into_iter().enumerate() {
            assert_eq!(z.index(), i);
            assert_eq!(Zone::from_index(i), z);
            assert_eq!(z.name().parse::<Zone>().unwrap(), z);
        }
        let mut sorted = Zone::all().to_vec();
        sorted.sort();
        assert_eq!(sorted, Zone::all().to_vec());
    }

    #[test]
    fn titles() {
        let z: Zone = "right_posterior_inferior".parse().unwrap();
        assert_eq!(z.title(), "Right Posterior Inferior");
        assert!("Left_Anterior_Superior".parse::<Zone>().is_err());
    }
}
