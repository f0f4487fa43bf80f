//! Deterministic train/validation/test partitions.
//!
//! Plans address samples by [`SampleKey`] (subject id plus index into that
//! subject's dataset), so single- and multi-subject plans share one shape.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{DatasetIndex, TemplateKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValStrategy {
    Samples,
    Subjects,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroShotMode {
    FirstSix,
    Random,
}

/// Serialized as its display string, e.g. `"leave_subjects_out(val=subjects)"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    LeaveSamplesOut,
    LeaveDomainsOut,
    LeaveSubjectsOut { val: ValStrategy },
    ZeroShot { mode: ZeroShotMode },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::LeaveSamplesOut => f.write_str("leave_samples_out"),
            Strategy::LeaveDomainsOut => f.write_str("leave_domains_out"),
            Strategy::LeaveSubjectsOut { val: ValStrategy::Samples } => f.write_str("leave_subjects_out(val=samples)"),
            Strategy::LeaveSubjectsOut { val: ValStrategy::Subjects } => f.write_str("leave_subjects_out(val=subjects)"),
            Strategy::ZeroShot { mode: ZeroShotMode::FirstSix } => f.write_str("zero_shot(mode=first_six)"),
            Strategy::ZeroShot { mode: ZeroShotMode::Random } => f.write_str("zero_shot(mode=random)"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "leave_samples_out" => Strategy::LeaveSamplesOut,
            "leave_domains_out" => Strategy::LeaveDomainsOut,
            "leave_subjects_out(val=samples)" => Strategy::LeaveSubjectsOut { val: ValStrategy::Samples },
            "leave_subjects_out(val=subjects)" => Strategy::LeaveSubjectsOut { val: ValStrategy::Subjects },
            "zero_shot(mode=first_six)" => Strategy::ZeroShot { mode: ZeroShotMode::FirstSix },
            "zero_shot(mode=random)" => Strategy::ZeroShot { mode: ZeroShotMode::Random },
            other => return Err(Error::Config(format!("unknown split strategy {other:?}"))),
        })
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> Self {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleKey {
    pub subject: u32,
    pub index: usize,
}

impl SampleKey {
    pub fn new(subject: u32, index: usize) -> Self {
        Self { subject, index }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub strategy: Strategy,
    pub train: Vec<SampleKey>,
    pub val: Vec<SampleKey>,
    pub test: Vec<SampleKey>,
    pub seed: u64,
    pub fold_id: usize,
}

impl SplitPlan {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subjects(&self) -> BTreeSet<u32> {
        self.train.iter().chain(&self.val).chain(&self.test).map(|k| k.subject).collect()
    }

    /// Plain-text form: one `key=value` per line, keys written as `subject:index`.
    pub fn to_text(&self) -> String {
        let keys = |v: &[SampleKey]| v.iter().map(|k| format!("{}:{}", k.subject, k.index)).collect::<Vec<_>>().join(" ");
        format!(
            "strategy={}\nseed={}\nfold_id={}\ntrain={}\nval={}\ntest={}\n",
            self.strategy,
            self.seed,
            self.fold_id,
            keys(&self.train),
            keys(&self.val),
            keys(&self.test)
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedHeader(format!("split plan line without '=': {line:?}")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| Error::MalformedHeader(format!("split plan lacks {k}")));
        let keys = |v: &str| -> Result<Vec<SampleKey>> {
            v.split_whitespace()
                .map(|tok| {
                    let (s, i) = tok
                        .split_once(':')
                        .ok_or_else(|| Error::MalformedHeader(format!("bad sample key {tok:?}")))?;
                    let bad = |_| Error::MalformedHeader(format!("bad sample key {tok:?}"));
                    Ok(SampleKey::new(s.parse().map_err(bad)?, i.parse().map_err(bad)?))
                })
                .collect()
        };
        let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::MalformedHeader(format!("bad {k}"))) };
        Ok(Self {
            strategy: get("strategy")?.parse()?,
            seed: num("seed")?,
            fold_id: num("fold_id")? as usize,
            train: keys(get("train")?)?,
            val: keys(get("val")?)?,
            test: keys(get("test")?)?,
        })
    }

    /// Checks pairwise disjointness of the partitions.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for k in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(*k) {
                return Err(Error::invalid(format!("sample {}:{} appears in two partitions", k.subject, k.index)));
            }
        }
        Ok(())
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Shuffle and cut off `floor(n * val_frac)` for validation; the rest trains.
fn split_train_val(mut pool: Vec<SampleKey>, r: &mut ChaCha8Rng) -> (Vec<SampleKey>, Vec<SampleKey>) {
    pool.shuffle(r);
    let n_val = pool.len() / 10;
    let val = pool.split_off(pool.len() - n_val);
    let mut train = pool;
    train.sort_unstable();
    let mut val = val;
    val.sort_unstable();
    (train, val)
}

fn by_domain(index: &DatasetIndex) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in index.entries.iter().enumerate() {
        m.entry(e.domain_id).or_default().push(i);
    }
    m
}

/// Largest-remainder apportionment of `n` items by `weights`: every part is
/// within one item of its exact share, ties go to the earlier part.
fn apportion(n: usize, weights: [usize; 3]) -> [usize; 3] {
    let total: usize = weights.iter().sum();
    let mut counts = weights.map(|w| n * w / total);
    let mut order = [0, 1, 2];
    // Fractional part of each exact share, as a numerator over `total`.
    order.sort_by_key(|&i| (std::cmp::Reverse(n * weights[i] % total), i));
    let leftover = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(leftover) {
        counts[i] += 1;
    }
    counts
}

/// Per-domain seeded shuffle into train/val/test at `ratios`, each partition
/// within one sample of its exact share (ties favor train).
pub fn leave_samples_out(index: &DatasetIndex, subject: u32, ratios: (usize, usize, usize), seed: u64) -> Result<SplitPlan> {
    let (a, b, c) = ratios;
    let total = a + b + c;
    if total == 0 || b == 0 || c == 0 {
        return Err(Error::invalid(format!("ratios {a}:{b}:{c} must give val and test a share")));
    }
    let mut r = rng(seed, 0);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (domain, mut members) in by_domain(index) {
        if members.len() < total {
            return Err(Error::invalid(format!(
                "domain {domain} has {} samples, needs at least {total}",
                members.len()
            )));
        }
        members.shuffle(&mut r);
        let [_, n_val, n_test] = apportion(members.len(), [a, b, c]);
        test.extend(members[..n_test].iter().map(|&i| SampleKey::new(subject, i)));
        val.extend(members[n_test..n_test + n_val].iter().map(|&i| SampleKey::new(subject, i)));
        train.extend(members[n_test + n_val..].iter().map(|&i| SampleKey::new(subject, i)));
    }
    for v in [&mut train, &mut val, &mut test] {
        v.sort_unstable();
    }
    Ok(SplitPlan {
        strategy: Strategy::LeaveSamplesOut,
        train,
        val,
        test,
        seed,
        fold_id: 0,
    })
}

/// One fold per round: the k-th domain of every class (round-robin over each
/// class's domains in id order) is tested; the rest splits 9:1 train/val.
pub fn leave_domains_out(index: &DatasetIndex, subject: u32, seed: u64) -> Result<Vec<SplitPlan>> {
    let domains = by_domain(index);
    let mut per_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&d, members) in &domains {
        per_class.entry(index.entries[members[0]].class_id).or_default().push(d);
    }
    if let Some((class, _)) = per_class.iter().find(|(_, ds)| ds.len() < 2) {
        return Err(Error::invalid(format!(
            "class {class} has a single domain; leave-domains-out needs at least two per class"
        )));
    }
    let n_folds = per_class.values().map(Vec::len).max().unwrap_or(0);
    (0..n_folds)
        .map(|fold| {
            let held: BTreeSet<usize> = per_class.values().map(|ds| ds[fold % ds.len()]).collect();
            let mut test = Vec::new();
            let mut pool = Vec::new();
            for (d, members) in &domains {
                let dst = if held.contains(d) { &mut test } else { &mut pool };
                dst.extend(members.iter().map(|&i| SampleKey::new(subject, i)));
            }
            let (train, val) = split_train_val(pool, &mut rng(seed, 1 + fold as u64));
            test.sort_unstable();
            Ok(SplitPlan {
                strategy: Strategy::LeaveDomainsOut,
                train,
                val,
                test,
                seed,
                fold_id: fold,
            })
        })
        .collect()
}

/// Folds holding out whole classes of a class-equals-domain dataset, each
/// class tested exactly once across `n_folds` folds (seeded assignment).
pub fn class_disjoint_folds(index: &DatasetIndex, subject: u32, n_folds: usize, seed: u64) -> Result<Vec<SplitPlan>> {
    if !index.class_is_domain {
        return Err(Error::invalid("class-disjoint folds need a dataset where class equals domain"));
    }
    let mut classes: Vec<usize> = (0..index.n_classes).collect();
    if n_folds < 2 || n_folds > classes.len() {
        return Err(Error::invalid(format!("{n_folds} folds for {} classes", classes.len())));
    }
    classes.shuffle(&mut rng(seed, 0));
    (0..n_folds)
        .map(|fold| {
            let held: BTreeSet<usize> = classes.iter().skip(fold).step_by(n_folds).copied().collect();
            Ok(hold_out_classes(index, subject, &held, Strategy::LeaveDomainsOut, seed, fold))
        })
        .collect()
}

fn hold_out_classes(
    index: &DatasetIndex,
    subject: u32,
    held: &BTreeSet<usize>,
    strategy: Strategy,
    seed: u64,
    fold: usize,
) -> SplitPlan {
    let mut test = Vec::new();
    let mut pool = Vec::new();
    for (i, e) in index.entries.iter().enumerate() {
        let dst = if held.contains(&e.class_id) { &mut test } else { &mut pool };
        dst.push(SampleKey::new(subject, i));
    }
    let (train, val) = split_train_val(pool, &mut rng(seed, 1 + fold as u64));
    SplitPlan {
        strategy,
        train,
        val,
        test,
        seed,
        fold_id: fold,
    }
}

/// Classes a zero-shot plan holds out, in presentation order for `FirstSix`.
pub fn zero_shot_classes(index: &DatasetIndex, mode: ZeroShotMode, n_test_classes: usize, seed: u64) -> Result<Vec<usize>> {
    if index.kind != TemplateKind::CvprLike || !index.class_is_domain {
        return Err(Error::invalid(format!(
            "zero-shot splits need the cvpr_like template, got {}",
            index.kind
        )));
    }
    if n_test_classes == 0 || n_test_classes >= index.n_classes {
        return Err(Error::invalid(format!("cannot hold out {n_test_classes} of {} classes", index.n_classes)));
    }
    let order = index.presentation_order();
    Ok(match mode {
        ZeroShotMode::FirstSix => order[..n_test_classes].to_vec(),
        ZeroShotMode::Random => {
            let mut c = order;
            c.sort_unstable();
            c.shuffle(&mut rng(seed, 7));
            c.truncate(n_test_classes);
            c.sort_unstable();
            c
        }
    })
}

pub fn zero_shot_split(index: &DatasetIndex, subject: u32, mode: ZeroShotMode, n_test_classes: usize, seed: u64) -> Result<SplitPlan> {
    let held: BTreeSet<usize> = zero_shot_classes(index, mode, n_test_classes, seed)?.into_iter().collect();
    Ok(hold_out_classes(index, subject, &held, Strategy::ZeroShot { mode }, seed, 0))
}

/// One fold per subject. `subjects` pairs each subject id with its sample count.
pub fn leave_subjects_out(subjects: &[(u32, usize)], val: ValStrategy, seed: u64) -> Result<Vec<SplitPlan>> {
    let min = match val {
        ValStrategy::Subjects => 3,
        ValStrategy::Samples => 2,
    };
    if subjects.len() < min {
        return Err(Error::invalid(format!(
            "leave-subjects-out with validation by {val:?} needs at least {min} subjects, got {}",
            subjects.len()
        )));
    }
    let ids: BTreeSet<u32> = subjects.iter().map(|s| s.0).collect();
    if ids.len() != subjects.len() {
        return Err(Error::invalid("duplicate subject ids"));
    }
    let keys = |s: (u32, usize)| (0..s.1).map(move |i| SampleKey::new(s.0, i));
    let n = subjects.len();
    Ok((0..n)
        .map(|fold| {
            let test: Vec<SampleKey> = keys(subjects[fold]).collect();
            let (mut train, mut val_keys) = (Vec::new(), Vec::new());
            match val {
                ValStrategy::Subjects => {
                    let v = (fold + 1) % n;
                    for (j, s) in subjects.iter().enumerate() {
                        if j == v {
                            val_keys.extend(keys(*s));
                        } else if j != fold {
                            train.extend(keys(*s));
                        }
                    }
                }
                ValStrategy::Samples => {
                    let pool: Vec<SampleKey> = subjects
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != fold)
                        .flat_map(|(_, s)| keys(*s))
                        .collect();
                    (train, val_keys) = split_train_val(pool, &mut rng(seed, 1 + fold as u64));
                }
            }
            train.sort_unstable();
            val_keys.sort_unstable();
            SplitPlan {
                strategy: Strategy::LeaveSubjectsOut { val },
                train,
                val: val_keys,
                test,
                seed,
                fold_id: fold,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::SampleMeta;
    use proptest::prelude::*;

    fn index(kind: TemplateKind, class_map: &[usize], per_domain: usize) -> DatasetIndex {
        let n_classes = class_map.iter().max().map_or(0, |m| m + 1);
        let mut entries = Vec::new();
        for (d, &c) in class_map.iter().enumerate() {
            for i in 0..per_domain {
                entries.push(SampleMeta {
                    domain_id: d,
                    class_id: c,
                    t_start: (d * 1000 + i) as f64,
                });
            }
        }
        DatasetIndex {
            kind,
            n_classes,
            class_is_domain: class_map.iter().enumerate().all(|(d, &c)| d == c),
            entries,
        }
    }

    fn cvpr() -> DatasetIndex {
        index(TemplateKind::CvprLike, &(0..40).collect::<Vec<_>>(), 50)
    }

    #[test]
    fn cvpr_lso_counts() {
        let ix = cvpr();
        let p = leave_samples_out(&ix, 0, (8, 1, 1), 3).unwrap();
        assert_eq!((p.train.len(), p.val.len(), p.test.len()), (1600, 200, 200));
        for d in 0..40 {
            let count = |v: &[SampleKey]| v.iter().filter(|k| ix.entries[k.index].domain_id == d).count();
            assert_eq!((count(&p.train), count(&p.val), count(&p.test)), (40, 5, 5));
        }
        assert_eq!(p, leave_samples_out(&ix, 0, (8, 1, 1), 3).unwrap());
        p.check_disjoint().unwrap();
    }

    #[test]
    fn single_domain_of_ten() {
        let ix = index(TemplateKind::Custom, &[0], 10);
        let p = leave_samples_out(&ix, 0, (8, 1, 1), 0).unwrap();
        assert_eq!((p.train.len(), p.val.len(), p.test.len()), (8, 1, 1));
        assert!(leave_samples_out(&index(TemplateKind::Custom, &[0], 9), 0, (8, 1, 1), 0).is_err());
    }

    #[test]
    fn kul_and_deap_ldo_folds() {
        let kul = index(TemplateKind::KulLike, &[0, 1, 0, 1, 0, 1, 0, 1], 360);
        let folds = leave_domains_out(&kul, 0, 1).unwrap();
        assert_eq!(folds.len(), 4);
        for f in &folds {
            assert_eq!(f.test.len(), 720);
        }
        let map: Vec<usize> = (0..40).map(|d| d % 4).collect();
        let deap = index(TemplateKind::DeapLike, &map, 30);
        let folds = leave_domains_out(&deap, 0, 1).unwrap();
        assert_eq!(folds.len(), 10);
        for f in &folds {
            let test_domains: BTreeSet<usize> = f.test.iter().map(|k| deap.entries[k.index].domain_id).collect();
            assert_eq!(test_domains.len(), 4);
        }
        assert!(leave_domains_out(&cvpr(), 0, 1).is_err());
    }

    #[test]
    fn zero_shot_first_six() {
        let mut ix = cvpr();
        // Present domains in a shuffled order.
        for e in &mut ix.entries {
            e.t_start = ((e.domain_id * 17) % 40) as f64 * 100.0 + e.t_start % 1000.0 / 100.0;
        }
        let p = zero_shot_split(&ix, 0, ZeroShotMode::FirstSix, 6, 0).unwrap();
        assert_eq!(p.test.len(), 300);
        let test_classes: BTreeSet<usize> = p.test.iter().map(|k| ix.entries[k.index].class_id).collect();
        let expected: BTreeSet<usize> = ix.presentation_order()[..6].iter().copied().collect();
        assert_eq!(test_classes, expected);
        let train_classes: BTreeSet<usize> = p.train.iter().map(|k| ix.entries[k.index].class_id).collect();
        assert_eq!(train_classes.len(), 34);
        let r1 = zero_shot_split(&ix, 0, ZeroShotMode::Random, 6, 5).unwrap();
        assert_eq!(r1, zero_shot_split(&ix, 0, ZeroShotMode::Random, 6, 5).unwrap());
        let kul = index(TemplateKind::KulLike, &[0, 1, 0, 1], 10);
        assert!(zero_shot_split(&kul, 0, ZeroShotMode::FirstSix, 6, 0).is_err());
    }

    #[test]
    fn subjects_folds() {
        let subjects: Vec<(u32, usize)> = (0..10).map(|s| (s, 20)).collect();
        let folds = leave_subjects_out(&subjects, ValStrategy::Subjects, 0).unwrap();
        assert_eq!(folds.len(), 10);
        for f in &folds {
            let sub = |v: &[SampleKey]| v.iter().map(|k| k.subject).collect::<BTreeSet<_>>().len();
            assert_eq!((sub(&f.train), sub(&f.val), sub(&f.test)), (8, 1, 1));
        }
        let three = leave_subjects_out(&subjects[..3], ValStrategy::Subjects, 0).unwrap();
        assert_eq!(three.len(), 3);
        assert!(leave_subjects_out(&subjects[..2], ValStrategy::Subjects, 0).is_err());
    }

    #[test]
    fn class_disjoint_folds_cover_every_class_once() {
        let ix = cvpr();
        let folds = class_disjoint_folds(&ix, 0, 5, 2).unwrap();
        let mut tested = Vec::new();
        for f in &folds {
            let cs: BTreeSet<usize> = f.test.iter().map(|k| ix.entries[k.index].class_id).collect();
            assert_eq!(cs.len(), 8);
            tested.extend(cs);
        }
        tested.sort_unstable();
        assert_eq!(tested, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn text_round_trip() {
        let subjects: Vec<(u32, usize)> = (0..4).map(|s| (s, 7)).collect();
        for p in leave_subjects_out(&subjects, ValStrategy::Samples, 9).unwrap() {
            assert_eq!(SplitPlan::from_text(&p.to_text()).unwrap(), p);
        }
        let p = leave_samples_out(&cvpr(), 2, (8, 1, 1), 1).unwrap();
        assert_eq!(SplitPlan::from_text(&p.to_text()).unwrap(), p);
        assert!(SplitPlan::from_text("strategy=leave_samples_out\n").is_err());
    }

    proptest! {
        #[test]
        fn lso_partition_laws(n_domains in 1usize..12, per in 10usize..40, seed: u64) {
            let map: Vec<usize> = (0..n_domains).map(|d| d % 3).collect();
            let ix = index(TemplateKind::Custom, &map, per);
            let p = leave_samples_out(&ix, 0, (8, 1, 1), seed).unwrap();
            p.check_disjoint().unwrap();
            prop_assert_eq!(p.len(), ix.entries.len());
            for d in 0..n_domains {
                let count = |v: &[SampleKey]| v.iter().filter(|k| ix.entries[k.index].domain_id == d).count() as f64;
                prop_assert!((count(&p.val) - per as f64 / 10.0).abs() <= 1.0);
                prop_assert!((count(&p.test) - per as f64 / 10.0).abs() <= 1.0);
                prop_assert!((count(&p.train) - per as f64 * 0.8).abs() <= 1.0);
            }
        }

        #[test]
        fn ldo_domain_exclusivity(per_class in 2usize..6, n_classes in 1usize..5, per in 1usize..20, seed: u64) {
            let map: Vec<usize> = (0..per_class * n_classes).map(|d| d % n_classes).collect();
            let ix = index(TemplateKind::Custom, &map, per);
            let folds = leave_domains_out(&ix, 0, seed).unwrap();
            let mut tested = BTreeSet::new();
            for f in &folds {
                f.check_disjoint().unwrap();
                prop_assert_eq!(f.len(), ix.entries.len());
                let dom = |v: &[SampleKey]| v.iter().map(|k| ix.entries[k.index].domain_id).collect::<BTreeSet<_>>();
                let test = dom(&f.test);
                prop_assert!(test.is_disjoint(&dom(&f.train)));
                prop_assert!(test.is_disjoint(&dom(&f.val)));
                prop_assert_eq!(test.len(), n_classes);
                tested.extend(test);
            }
            prop_assert_eq!(tested.len(), map.len());
        }
    }
}
