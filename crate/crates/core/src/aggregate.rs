//! Zone and patient Lung Ultrasound Scores from frame classes.
//!
//! A zone's score is the class with the most frames in that zone (ties go
//! to the higher class by default). A patient's global score is the sum of
//! the zone scores: 0 to 36 over all 12 zones. Zones without frames are
//! left out of the sum and the report is marked partial.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::data::{DataError, SeverityScore, Zone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    High,
    Low,
}

impl FromStr for TieBreak {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high" => Ok(TieBreak::High),
            "low" => Ok(TieBreak::Low),
            other => Err(format!("tie_break must be high or low, got {other:?}")),
        }
    }
}

impl std::fmt::Display for TieBreak {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TieBreak::High => "high",
            TieBreak::Low => "low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegionTally {
    pub zone: Zone,
    pub counts: [u64; 4],
    /// `None` iff every count is zero.
    pub region_score: Option<SeverityScore>,
}

impl RegionTally {
    pub fn from_counts(zone: Zone, counts: [u64; 4], tie_break: TieBreak) -> Self {
        let max = *counts.iter().max().unwrap();
        let region_score = (max > 0).then(|| {
            let mut winners = (0..4).filter(|&c| counts[c] == max);
            let pick = match tie_break {
                TieBreak::High => winners.next_back(),
                TieBreak::Low => winners.next(),
            };
            SeverityScore::from_index(pick.unwrap())
        });
        RegionTally {
            zone,
            counts,
            region_score,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.region_score.is_none()
    }
}

/// Tallies the frame classes of one (patient, zone).
pub fn tally_region<I>(zone: Zone, frames: I, tie_break: TieBreak) -> RegionTally
where
    I: IntoIterator<Item = SeverityScore>,
{
    let mut counts = [0u64; 4];
    for s in frames {
        counts[s.index()] += 1;
    }
    RegionTally::from_counts(zone, counts, tie_break)
}

/// One zone's count table: `(zone, truth counts, predicted counts)`.
pub type CountRow = (Zone, [u64; 4], [u64; 4]);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZoneRow {
    pub zone: Zone,
    pub truth: RegionTally,
    pub predicted: RegionTally,
    /// Both zone scores exist and are equal.
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatientReport {
    pub patient_id: String,
    /// One row per zone with any frames, in canonical zone order.
    pub zones: Vec<ZoneRow>,
    pub global_truth: u32,
    pub global_predicted: u32,
    /// Fewer than 12 zones carry a ground-truth score.
    pub truth_partial: bool,
    /// Fewer than 12 zones carry a predicted score.
    pub predicted_partial: bool,
    /// Zones with no frames at all.
    pub missing_zones: Vec<Zone>,
}

/// One zoned frame: ground-truth class and predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZonedFrame {
    pub zone: Zone,
    pub truth: SeverityScore,
    pub predicted: SeverityScore,
}

pub fn build_patient_report(
    patient_id: &str,
    frames: &[ZonedFrame],
    tie_break: TieBreak,
) -> PatientReport {
    let mut counts: BTreeMap<Zone, ([u64; 4], [u64; 4])> = BTreeMap::new();
    for f in frames {
        let entry = counts.entry(f.zone).or_default();
        entry.0[f.truth.index()] += 1;
        entry.1[f.predicted.index()] += 1;
    }
    let rows: Vec<CountRow> =
        counts.into_iter().map(|(z, (t, p))| (z, t, p)).collect();
    PatientReport::from_counts(patient_id, &rows, tie_break)
}

impl PatientReport {
    /// Builds a report straight from per-zone count tables. Rows for the
    /// same zone are summed.
    pub fn from_counts(
        patient_id: &str,
        rows: &[CountRow],
        tie_break: TieBreak,
    ) -> PatientReport {
        let mut by_zone: BTreeMap<Zone, ([u64; 4], [u64; 4])> = BTreeMap::new();
        for &(zone, t, p) in rows {
            let e = by_zone.entry(zone).or_default();
            for c in 0..4 {
                e.0[c] += t[c];
                e.1[c] += p[c];
            }
        }
        let zones: Vec<ZoneRow> = by_zone
            .into_iter()
            .filter(|(_, (t, p))| t.iter().chain(p.iter()).any(|&c| c > 0))
            .map(|(zone, (t, p))| {
                let truth = RegionTally::from_counts(zone, t, tie_break);
                let predicted = RegionTally::from_counts(zone, p, tie_break);
                let agree = truth.region_score.is_some() && truth.region_score == predicted.region_score;
                ZoneRow {
                    zone,
                    truth,
                    predicted,
                    agree,
                }
            })
            .collect();
        let sum = |f: fn(&ZoneRow) -> Option<SeverityScore>| -> (u32, usize) {
            zones.iter().filter_map(f).fold((0, 0), |(s, n), v| (s + v.value() as u32, n + 1))
        };
        let (global_truth, n_truth) = sum(|r| r.truth.region_score);
        let (global_predicted, n_pred) = sum(|r| r.predicted.region_score);
        let present: Vec<Zone> = zones.iter().map(|r| r.zone).collect();
        PatientReport {
            patient_id: patient_id.to_string(),
            missing_zones: Zone::all().into_iter().filter(|z| !present.contains(z)).collect(),
            global_truth,
            global_predicted,
            truth_partial: n_truth < Zone::COUNT,
            predicted_partial: n_pred < Zone::COUNT,
            zones,
        }
    }

    pub fn row(&self, zone: Zone) -> Option<&ZoneRow> {
        self.zones.iter().find(|r| r.zone == zone)
    }

    pub fn disagreeing_zones(&self) -> Vec<Zone> {
        self.zones.iter().filter(|r| !r.agree).map(|r| r.zone).collect()
    }

    /// Table with one row per zone (all 12, canonical order): per-score
    /// truth/predicted counts, zone scores and agreement, then a global row.
    pub fn to_table(&self) -> String {
        let mut out = String::from("region");
        for c in 0..4 {
            let _ = write!(out, ",score{c}_truth,score{c}_predicted");
        }
        out.push_str(",region_truth,region_predicted,agree\n");
        for zone in Zone::all() {
            out.push_str(&zone.title());
            match self.row(zone) {
                Some(r) => {
                    for c in 0..4 {
                        let _ = write!(out, ",{},{}", r.truth.counts[c], r.predicted.counts[c]);
                    }
                    let score = |s: Option<SeverityScore>| s.map(|v| v.to_string()).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        ",{},{},{}",
                        score(r.truth.region_score),
                        score(r.predicted.region_score),
                        if r.agree { "yes" } else { "no" }
                    );
                }
                None => out.push_str(",0,0,0,0,0,0,0,0,,,missing\n"),
            }
        }
        let flag = |partial: bool| if partial { "partial" } else { "complete" };
        let _ = writeln!(
            out,
            "Global Score,,,,,,,,,{},{},{}/{}",
            self.global_truth,
            self.global_predicted,
            flag(self.truth_partial),
            flag(self.predicted_partial)
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Reads a count-injection table: header
/// `zone,truth0,truth1,truth2,truth3,pred0,pred1,pred2,pred3`, then one row
/// per zone with the canonical zone name. Empty cells count as 0.
pub fn parse_count_table(text: &str) -> Result<Vec<CountRow>, DataError> {
    const HEADER: &str = "zone,truth0,truth1,truth2,truth3,pred0,pred1,pred2,pred3";
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => {
            return Err(DataError::MalformedRow {
                line: 1,
                reason: format!("count table header must be {HEADER}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, l) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = l.trim().split(',').map(str::trim).collect();
        if fields.len() != 9 {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected 9 columns, found {}", fields.len()),
            });
        }
        let zone: Zone = fields[0].parse().map_err(|_| DataError::UnknownZone {
            line,
            value: fields[0].to_string(),
        })?;
        let mut nums = [0u64; 8];
        for (n, f) in nums.iter_mut().zip(&fields[1..]) {
            *n = if f.is_empty() {
                0
            } else {
                f.parse().map_err(|_| DataError::MalformedRow {
                    line,
                    reason: format!("bad count {f:?}"),
                })?
            };
        }
        rows.push((
            zone,
            [nums[0], nums[1], nums[2], nums[3]],
            [nums[4], nums[5], nums[6], nums[7]],
        ));
    }
    Ok(rows)
}

/// Frame outcome used for cohort statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOutcome {
    pub patient_id: String,
    pub zone: Option<Zone>,
    pub truth: SeverityScore,
    pub predicted: SeverityScore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub patients: Vec<PatientReport>,
    /// Agreeing zones over zones scored on both sides, across patients.
    pub zone_agreement_rate: Option<f64>,
    pub mean_abs_global_error: Option<f64>,
    /// Per zone, fraction of zoned frames classified correctly.
    pub zone_frame_accuracy: Vec<Option<f64>>,
    /// Per zone, fraction of patients whose zone scores agree.
    pub zone_score_agreement: Vec<Option<f64>>,
}

/// Per-patient reports plus cohort aggregates. Frames without a zone are
/// ignored.
pub fn cohort_report(frames: &[FrameOutcome], tie_break: TieBreak) -> CohortSummary {
    let mut by_patient: BTreeMap<&str, Vec<ZonedFrame>> = BTreeMap::new();
    let mut zone_hits = [(0u64, 0u64); 12];
    for f in frames {
        let Some(zone) = f.zone else { continue };
        by_patient.entry(&f.patient_id).or_default().push(ZonedFrame {
            zone,
            truth: f.truth,
            predicted: f.predicted,
        });
        let hit = &mut zone_hits[zone.index()];
        hit.1 += 1;
        if f.truth == f.predicted {
            hit.0 += 1;
        }
    }
    let reports = by_patient
        .into_iter()
        .map(|(p, fs)| build_patient_report(p, &fs, tie_break))
        .collect();
    let mut summary = CohortSummary::from_reports(reports);
    summary.zone_frame_accuracy = zone_hits
        .iter()
        .map(|&(hit, n)| (n > 0).then(|| hit as f64 / n as f64))
        .collect();
    summary
}

impl CohortSummary {
    /// Aggregates over ready-made reports. Frame accuracy per zone needs
    /// frame outcomes and is left undefined here.
    pub fn from_reports(patients: Vec<PatientReport>) -> CohortSummary {
        let mut agree = 0u64;
        let mut compared = 0u64;
        let mut zone_agree = [(0u64, 0u64); 12];
        for p in &patients {
            for r in &p.zones {
                if r.truth.region_score.is_some() && r.predicted.region_score.is_some() {
                    compared += 1;
                    zone_agree[r.zone.index()].1 += 1;
                    if r.agree {
                        agree += 1;
                        zone_agree[r.zone.index()].0 += 1;
                    }
                }
            }
        }
        let mean_abs_global_error = (!patients.is_empty()).then(|| {
            patients
                .iter()
                .map(|p| (p.global_truth as f64 - p.global_predicted as f64).abs())
                .sum::<f64>()
                / patients.len() as f64
        });
        CohortSummary {
            zone_agreement_rate: (compared > 0).then(|| agree as f64 / compared as f64),
            mean_abs_global_error,
            zone_frame_accuracy: vec![None; 12],
            zone_score_agreement: zone_agree
                .iter()
                .map(|&(a, n)| (n > 0).then(|| a as f64 / n as f64))
                .collect(),
            patients,
        }
    }

    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "undefined".into());
        let mut out = String::new();
        let _ = writeln!(out, "patients={}", self.patients.len());
        let _ = writeln!(out, "zone_agreement_rate={}", opt(self.zone_agreement_rate));
        let _ = writeln!(out, "mean_abs_global_error={}", opt(self.mean_abs_global_error));
        for z in Zone::all() {
            let _ = writeln!(out, "zone_frame_accuracy.{}={}", z.name(), opt(self.zone_frame_accuracy[z.index()]));
            let _ = writeln!(out, "zone_score_agreement.{}={}", z.name(), opt(self.zone_score_agreement[z.index()]));
        }
        for p in &self.patients {
            let _ = writeln!(
                out,
                "global.{}={},{}",
                p.patient_id, p.global_truth, p.global_predicted
            );
        }
        out
    }
}
