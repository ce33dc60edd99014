use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::volume::Label;
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Cross-validation assignment of the training cases plus the held-out test set.
/// Each training case validates in exactly one fold and trains in the others.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    /// case id → index of the fold in which the case is used for validation.
    pub assignments: BTreeMap<String, usize>,
    pub holdout: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
}

impl FoldSplit {
    pub fn role(&self, case_id: &str, fold: usize) -> Option<Role> {
        self.assignments
            .get(case_id)
            .map(|&f| if f == fold { Role::Val } else { Role::Train })
    }

    /// `(train, val)` ids for `fold`, in case-id order.
    pub fn fold_members(&self, fold: usize) -> Result<(Vec<String>, Vec<String>)> {
        if fold >= self.k {
            return Err(Error::Config(format!("fold {fold} out of range for k={}", self.k)));
        }
        let (val, train) = self
            .assignments
            .iter()
            .partition::<Vec<_>, _>(|(_, &f)| f == fold);
        let ids = |v: Vec<(&String, &usize)>| v.into_iter().map(|(id, _)| id.clone()).collect();
        Ok((ids(train), ids(val)))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(id) = self.holdout.iter().find(|id| self.assignments.contains_key(*id)) {
            return Err(Error::Data(format!("test case {id} also appears in a fold")));
        }
        if let Some((id, f)) = self.assignments.iter().find(|(_, &f)| f >= self.k) {
            return Err(Error::Data(format!("case {id} assigned to fold {f} with k={}", self.k)));
        }
        Ok(())
    }
}

/// Canonical per-class id lists: ids sorted, duplicates rejected.
fn by_class(cases: &[(String, Label)]) -> Result<BTreeMap<Label, Vec<String>>> {
    let mut sorted: Vec<&(String, Label)> = cases.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!("duplicate case id {}", w[0].0)));
    }
    let mut groups: BTreeMap<Label, Vec<String>> = BTreeMap::new();
    for (id, label) in sorted {
        groups.entry(*label).or_default().push(id.clone());
    }
    Ok(groups)
}

fn check_class_sizes(groups: &BTreeMap<Label, Vec<String>>, k: usize) -> Result<()> {
    for (label, ids) in groups {
        if ids.len() < k {
            return Err(Error::Stratification(format!(
                "class {label} has {} cases, fewer than {k} folds",
                ids.len()
            )));
        }
    }
    Ok(())
}

/// Largest-remainder allocation of `total` across groups proportional to
/// `sizes`; ties in the remainder go to the earlier group.
fn proportional(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse((sizes[i] * total) % n));
    let short = total - alloc.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        alloc[i] += 1;
    }
    alloc
}

/// Stratified train/test split. Returns `(train, test)` ids in case-id order.
///
/// `min_per_class` is the number of folds the training part will later be
/// split into; every class needs at least that many cases.
pub fn stratified_split(
    cases: &[(String, Label)],
    test_n: usize,
    min_per_class: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if test_n == 0 || test_n >= cases.len() {
        return Err(Error::Config(format!(
            "test size {test_n} must lie strictly between 0 and {}",
            cases.len()
        )));
    }
    let groups = by_class(cases)?;
    check_class_sizes(&groups, min_per_class)?;
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let quota = proportional(&sizes, test_n);
    let mut rng = rng::stream(seed, &[tag::SPLIT]);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for ((_, ids), q) in groups.into_iter().zip(quota) {
        let mut ids = ids;
        ids.shuffle(&mut rng);
        test.extend(ids.drain(..q));
        train.extend(ids);
    }
    train.sort();
    test.sort();
    Ok((train, test))
}

/// Stratified k-fold over the training cases. Each class is shuffled and
/// dealt round-robin, continuing the rotation from where the previous class
/// stopped so fold sizes stay within one of each other.
pub fn stratified_kfold(train: &[(String, Label)], k: usize, seed: u64, holdout: Vec<String>) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let groups = by_class(train)?;
    check_class_sizes(&groups, k)?;
    let mut rng = rng::stream(seed, &[tag::KFOLD]);
    let mut assignments = BTreeMap::new();
    let mut next = 0usize;
    for ids in groups.into_values() {
        let mut ids = ids;
        ids.shuffle(&mut rng);
        for id in ids {
            assignments.insert(id, next % k);
            next += 1;
        }
    }
    let mut holdout = holdout;
    holdout.sort();
    let split = FoldSplit { k, assignments, holdout };
    split.validate()?;
    Ok(split)
}

/// Full protocol: hold out `test_n` cases, then stratify the rest into `k` folds.
pub fn split_dataset(cases: &[(String, Label)], test_n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    let (train, test) = stratified_split(cases, test_n, k, seed)?;
    let label_of: BTreeMap<&str, Label> = cases.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let train_cases: Vec<(String, Label)> = train.iter().map(|id| (id.clone(), label_of[id.as_str()])).collect();
    stratified_kfold(&train_cases, k, seed, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cohort(counts: [usize; 3]) -> Vec<(String, Label)> {
        let mut out = Vec::new();
        for (l, &n) in Label::ALL.iter().zip(&counts) {
            for i in 0..n {
                out.push((format!("{}-{i:03}", l.as_str()), *l));
            }
        }
        out
    }

    fn count(ids: &[String], cases: &[(String, Label)]) -> [usize; 3] {
        let mut c = [0; 3];
        for (id, l) in cases {
            if ids.contains(id) {
                c[l.index()] += 1;
            }
        }
        c
    }

    #[test]
    fn reference_cohort_allocation() {
        assert_eq!(proportional(&[131, 58, 38], 76), vec![44, 19, 13]);
        let cases = cohort([131, 58, 38]);
        let (train, test) = stratified_split(&cases, 76, 3, 42).unwrap();
        assert_eq!(train.len(), 151);
        assert_eq!(count(&test, &cases), [44, 19, 13]);
    }

    #[test]
    fn order_independent() {
        let cases = cohort([20, 11, 9]);
        let mut rev = cases.clone();
        rev.reverse();
        assert_eq!(split_dataset(&cases, 10, 3, 7).unwrap(), split_dataset(&rev, 10, 3, 7).unwrap());
    }

    #[test]
    fn seeds_change_membership_not_counts() {
        let cases = cohort([20, 11, 9]);
        let (_, a) = stratified_split(&cases, 10, 3, 1).unwrap();
        let (_, b) = stratified_split(&cases, 10, 3, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(count(&a, &cases), count(&b, &cases));
    }

    #[test]
    fn folds_are_balanced_and_cover_training() {
        let cases = cohort([50, 21, 14]);
        let split = stratified_kfold(&cases, 3, 42, vec![]).unwrap();
        let mut union = Vec::new();
        let mut per_fold = Vec::new();
        for f in 0..3 {
            let (train, val) = split.fold_members(f).unwrap();
            assert_eq!(train.len() + val.len(), cases.len());
            per_fold.push(count(&val, &cases));
            union.extend(val);
        }
        union.sort();
        let mut all: Vec<String> = cases.iter().map(|c| c.0.clone()).collect();
        all.sort();
        assert_eq!(union, all);
        for c in 0..3 {
            let v: Vec<usize> = per_fold.iter().map(|f| f[c]).collect();
            assert!(v.iter().max().unwrap() - v.iter().min().unwrap() <= 1);
        }
        let sizes: Vec<usize> = per_fold.iter().map(|f| f.iter().sum()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn small_class_rejected() {
        let cases = cohort([10, 2, 5]);
        assert!(matches!(stratified_kfold(&cases, 3, 1, vec![]), Err(Error::Stratification(_))));
        assert!(matches!(stratified_split(&cases, 5, 3, 1), Err(Error::Stratification(_))));
    }

    #[test]
    fn holdout_disjoint() {
        let cases = cohort([30, 15, 10]);
        let split = split_dataset(&cases, 12, 3, 42).unwrap();
        assert_eq!(split.holdout.len(), 12);
        assert!(split.holdout.iter().all(|id| !split.assignments.contains_key(id)));
        assert_eq!(split.role(&split.holdout[0], 0), None);
    }
}
