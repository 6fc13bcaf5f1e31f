use std::collections::BTreeMap;

use super::{CovidStatus, DataError, ImageRecord};
use crate::rng::SeededRng;

/// Patient-level assignment to `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: BTreeMap<String, (CovidStatus, usize)>,
}

/// Splits patients into `k` folds, balancing each covid_status group
/// separately.
///
/// Within a group, patient ids are sorted, shuffled with a stream derived
/// from `seed` and the group name, then dealt round-robin. The healthy group
/// starts dealing where the positive group stopped so total fold sizes also
/// stay within one of each other.
pub fn make_folds(records: &[ImageRecord], k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    if k < 2 {
        return Err(DataError::InvalidFoldCount(k));
    }
    let mut groups: BTreeMap<CovidStatus, Vec<&str>> = BTreeMap::new();
    let mut statuses: BTreeMap<&str, CovidStatus> = BTreeMap::new();
    for r in records {
        statuses.entry(&r.patient_id).or_insert(r.covid_status);
    }
    for (&pid, &status) in &statuses {
        groups.entry(status).or_default().push(pid);
    }
    for (&status, pids) in &groups {
        if pids.len() < k {
            return Err(DataError::TooFewPatients {
                status,
                found: pids.len(),
                k,
            });
        }
    }

    let mut assignment = BTreeMap::new();
    let mut next_fold = 0usize;
    for (status, mut pids) in groups {
        let mut rng = SeededRng::derive(seed, format!("folds/{status}").as_bytes());
        rng.shuffle(&mut pids);
        for pid in pids {
            assignment.insert(pid.to_string(), (status, next_fold));
            next_fold = (next_fold + 1) % k;
        }
    }
    Ok(FoldPlan { k, assignment })
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, patient_id: &str) -> Option<usize> {
        self.assignment.get(patient_id).map(|&(_, f)| f)
    }

    pub fn status_of(&self, patient_id: &str) -> Option<CovidStatus> {
        self.assignment.get(patient_id).map(|&(s, _)| s)
    }

    /// All patients with their status and fold, sorted by patient id.
    pub fn iter(&self) -> impl Iterator<Item = (&str, CovidStatus, usize)> {
        self.assignment
            .iter()
            .map(|(p, &(s, f))| (p.as_str(), s, f))
    }

    pub fn patients_in(&self, fold: usize) -> Vec<&str> {
        self.iter()
            .filter(|&(_, _, f)| f == fold)
            .map(|(p, _, _)| p)
            .collect()
    }

    /// Patient count per fold for one status group.
    pub fn counts(&self, status: CovidStatus) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for (_, s, f) in self.iter() {
            if s == status {
                counts[f] += 1;
            }
        }
        counts
    }

    /// Indices of `records` held out in `fold` and of the remaining
    /// training records, each in record order.
    pub fn split_indices(&self, records: &[ImageRecord], fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, r) in records.iter().enumerate() {
            if self.fold_of(&r.patient_id) == Some(fold) {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    /// `patient_id,covid_status,fold` table with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("patient_id,covid_status,fold\n");
        for (p, s, f) in self.iter() {
            out.push_str(&format!("{p},{s},{f}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<FoldPlan, DataError> {
        let mut assignment = BTreeMap::new();
        let mut k = 0;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h.trim() == "patient_id,covid_status,fold" => {}
            _ => {
                return Err(DataError::MalformedRow {
                    line: 1,
                    reason: "split file header must be patient_id,covid_status,fold".into(),
                })
            }
        }
        for (idx, l) in lines {
            let bad = |reason: String| DataError::MalformedRow {
                line: idx + 1,
                reason,
            };
            let fields: Vec<&str> = l.trim().split(',').collect();
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 columns, found {}", fields.len())));
            }
            let status: CovidStatus = fields[1].parse().map_err(bad)?;
            let fold: usize = fields[2]
                .parse()
                .map_err(|_| bad(format!("bad fold index {:?}", fields[2])))?;
            k = k.max(fold + 1);
            assignment.insert(fields[0].to_string(), (status, fold));
        }
        if k < 2 {
            return Err(DataError::InvalidFoldCount(k));
        }
        Ok(FoldPlan { k, assignment })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SeverityScore, Zone};

    pub(crate) fn cohort(n_pos: usize, n_healthy: usize, frames_each: usize) -> Vec<ImageRecord> {
        let mut out = Vec::new();
        for (prefix, n, status) in [
            ("pos", n_pos, CovidStatus::Positive),
            ("hlt", n_healthy, CovidStatus::Healthy),
        ] {
            for p in 0..n {
                for f in 0..frames_each {
                    out.push(ImageRecord {
                        image_id: format!("{prefix}{p}-{f}"),
                        patient_id: format!("{prefix}{p}"),
                        covid_status: status,
                        zone: Some(Zone::from_index(f % 12)),
                        label: SeverityScore::from_index(f % 4),
                        image_path: String::new(),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn full_cohort_balance() {
        let recs = cohort(37, 12, 2);
        let plan = make_folds(&recs, 3, 2024).unwrap();
        let mut pos = plan.counts(CovidStatus::Positive);
        pos.sort();
        assert_eq!(pos, vec![12, 12, 13]);
        assert_eq!(plan.counts(CovidStatus::Healthy), vec![4, 4, 4]);
    }

    #[test]
    fn three_patients_three_folds() {
        let recs = cohort(3, 0, 1);
        let plan = make_folds(&recs, 3, 1).unwrap();
        assert_eq!(plan.counts(CovidStatus::Positive), vec![1, 1, 1]);
    }

    #[test]
    fn deterministic_and_row_order_invariant() {
        let recs = cohort(10, 5, 3);
        let a = make_folds(&recs, 3, 99).unwrap();
        let b = make_folds(&recs, 3, 99).unwrap();
        assert_eq!(a, b);
        let mut reversed = recs.clone();
        reversed.reverse();
        assert_eq!(make_folds(&reversed, 3, 99).unwrap(), a);
    }

    #[test]
    fn too_few_patients() {
        let recs = cohort(5, 2, 1);
        assert!(matches!(
            make_folds(&recs, 3, 0),
            Err(DataError::TooFewPatients {
                status: CovidStatus::Healthy,
                found: 2,
                k: 3
            })
        ));
        assert!(matches!(
            make_folds(&recs, 1, 0),
            Err(DataError::InvalidFoldCount(1))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let recs = cohort(7, 4, 1);
        let plan = make_folds(&recs, 3, 5).unwrap();
        assert_eq!(FoldPlan::from_csv(&plan.to_csv()).unwrap(), plan);
    }

    #[test]
    fn split_indices_partition_records() {
        let recs = cohort(6, 3, 4);
        let plan = make_folds(&recs, 3, 8).unwrap();
        let mut seen = vec![0usize; recs.len()];
        for f in 0..3 {
            let (train, test) = plan.split_indices(&recs, f);
            assert_eq!(train.len() + test.len(), recs.len());
            for i in test {
                seen[i] += 1;
                assert_eq!(plan.fold_of(&recs[i].patient_id), Some(f));
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
