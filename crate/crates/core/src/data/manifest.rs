use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DataError, SeverityScore, Zone};
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "image_id,patient_id,covid_status,zone,score,image_path";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovidStatus {
    Positive,
    Healthy,
}

impl CovidStatus {
    pub fn name(self) -> &'static str {
        match self {
            CovidStatus::Positive => "positive",
            CovidStatus::Healthy => "healthy",
        }
    }
}

impl fmt::Display for CovidStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovidStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(CovidStatus::Positive),
            "healthy" => Ok(CovidStatus::Healthy),
            other => Err(format!("unknown covid_status {other:?}")),
        }
    }
}

/// One labeled frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub patient_id: String,
    pub covid_status: CovidStatus,
    /// `None` for frames outside the 12 scanning zones; they count in frame
    /// metrics but not in zone aggregation.
    pub zone: Option<Zone>,
    pub label: SeverityScore,
    pub image_path: String,
}

impl ImageRecord {
    /// Image location, resolved against `base` when relative.
    pub fn resolve_path(&self, base: &Path) -> PathBuf {
        let p = Path::new(&self.image_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_manifest(&text)?)
}

/// Parses manifest text. Row order is preserved; blank lines are ignored.
pub fn parse_manifest(text: &str) -> Result<Vec<ImageRecord>, DataError> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .map(|(_, l)| l.trim_end_matches('\r'))
        .ok_or(DataError::MalformedRow {
            line: 1,
            reason: "missing header line".into(),
        })?;
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_fields.join(",") != MANIFEST_HEADER {
        return Err(DataError::MalformedRow {
            line: 1,
            reason: format!("header must be {MANIFEST_HEADER:?}, found {header:?}"),
        });
    }

    let mut records = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut statuses: HashMap<String, CovidStatus> = HashMap::new();

    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 6 {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected 6 columns, found {}", fields.len()),
            });
        }
        let field = |i: usize| fields[i].trim();

        let image_id = field(0);
        let patient_id = field(1);
        if image_id.is_empty() || patient_id.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "image_id and patient_id must be non-empty".into(),
            });
        }
        let covid_status: CovidStatus = field(2)
            .parse()
            .map_err(|reason| DataError::MalformedRow { line, reason })?;
        let zone = match field(3) {
            "" => None,
            z => Some(z.parse::<Zone>().map_err(|_| DataError::UnknownZone {
                line,
                value: z.to_string(),
            })?),
        };
        let label = parse_score(field(4), line)?;
        let image_path = field(5);

        if !seen_ids.insert(image_id.to_string()) {
            return Err(DataError::DuplicateImageId {
                line,
                image_id: image_id.to_string(),
            });
        }
        match statuses.get(patient_id) {
            Some(&s) if s != covid_status => {
                return Err(DataError::ContradictoryStatus {
                    line,
                    patient_id: patient_id.to_string(),
                })
            }
            Some(_) => {}
            None => {
                statuses.insert(patient_id.to_string(), covid_status);
            }
        }

        records.push(ImageRecord {
            image_id: image_id.to_string(),
            patient_id: patient_id.to_string(),
            covid_status,
            zone,
            label,
            image_path: image_path.to_string(),
        });
    }
    Ok(records)
}

fn parse_score(s: &str, line: usize) -> Result<SeverityScore, DataError> {
    // Integers outside 0..=3 are a score error; anything non-integer is a
    // malformed field.
    match s.parse::<i64>() {
        Ok(_) => s.parse().map_err(|_| DataError::InvalidScore {
            line,
            value: s.to_string(),
        }),
        Err(_) => Err(DataError::MalformedRow {
            line,
            reason: format!("score {s:?} is not an integer"),
        }),
    }
}

pub fn write_manifest(records: &[ImageRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(MANIFEST_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.image_id,
            r.patient_id,
            r.covid_status,
            r.zone.map(Zone::name).unwrap_or(""),
            r.label,
            r.image_path
        ));
    }
    out
}

/// Frame count per severity class; absent classes report 0.
pub fn class_histogram<'a, I>(records: I) -> BTreeMap<SeverityScore, usize>
where
    I: IntoIterator<Item = &'a ImageRecord>,
{
    let mut hist: BTreeMap<SeverityScore, usize> =
        SeverityScore::ALL.iter().map(|&s| (s, 0)).collect();
    for r in records {
        *hist.entry(r.label).or_default() += 1;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(rows: &[&str]) -> String {
        let mut s = String::from(MANIFEST_HEADER);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn four_labels_round_trip() {
        let text = manifest(&[
            "a,p1,positive,left_anterior_superior,0,a.png",
            "b,p1,positive,,1,b.png",
            "c,p2,healthy,right_lateral_inferior,2,c.png",
            "d,p2,healthy,left_posterior_inferior,3,d.png",
        ]);
        let recs = parse_manifest(&text).unwrap();
        let labels: Vec<u8> = recs.iter().map(|r| r.label.value()).collect();
        assert_eq!(labels, vec![0, 1, 2, 3]);
        assert_eq!(recs[1].zone, None);
        assert_eq!(recs[2].covid_status, CovidStatus::Healthy);
        assert_eq!(parse_manifest(&write_manifest(&recs)).unwrap(), recs);
    }

    #[test]
    fn label_four_is_invalid_score() {
        let text = manifest(&["a,p1,positive,,4,a.png"]);
        assert!(matches!(
            parse_manifest(&text),
            Err(DataError::InvalidScore { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_rows() {
        let cases = [
            "a,p1,positive,,1",
            "a,p1,positive,,1,a.png,extra",
            "a,p1,maybe,,1,a.png",
            "a,p1,positive,,x,a.png",
            ",p1,positive,,1,a.png",
        ];
        for row in cases {
            let err = parse_manifest(&manifest(&[row])).unwrap_err();
            assert!(matches!(err, DataError::MalformedRow { .. }), "{row}: {err:?}");
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = manifest(&["a,p1,positive,,1,a.png", "a,p2,positive,,1,b.png"]);
        assert!(matches!(
            parse_manifest(&text),
            Err(DataError::DuplicateImageId { line: 3, .. })
        ));
    }

    #[test]
    fn unknown_zone_rejected() {
        let text = manifest(&["a,p1,positive,left_middle,1,a.png"]);
        assert!(matches!(
            parse_manifest(&text),
            Err(DataError::UnknownZone { .. })
        ));
    }

    #[test]
    fn contradictory_status_rejected() {
        let text = manifest(&["a,p1,positive,,1,a.png", "b,p1,healthy,,0,b.png"]);
        assert!(matches!(
            parse_manifest(&text),
            Err(DataError::ContradictoryStatus { .. })
        ));
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_manifest("id,patient\n").is_err());
        assert!(parse_manifest("").is_err());
    }

    #[test]
    fn healthy_frames_may_carry_any_label() {
        let text = manifest(&["a,h,healthy,,3,a.png"]);
        assert_eq!(parse_manifest(&text).unwrap()[0].label.value(), 3);
    }

    #[test]
    fn histogram_counts() {
        assert_eq!(
            class_histogram(&[]).values().copied().collect::<Vec<_>>(),
            vec![0, 0, 0, 0]
        );
        let text = manifest(&[
            "a,p,positive,,2,a",
            "b,p,positive,,2,b",
            "c,p,positive,,3,c",
        ]);
        let recs = parse_manifest(&text).unwrap();
        let hist = class_histogram(&recs);
        assert_eq!(hist.values().copied().collect::<Vec<_>>(), vec![0, 0, 2, 1]);
    }
}
