use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Group, HarnessError, RawResult};

/// `num / den`, or `None` when there is nothing to divide.
pub fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Cuts to two decimals, the way the published tables are printed.
pub fn truncate2(x: f64) -> f64 {
    (x * 100.0 + 1e-9).floor() / 100.0
}

pub fn fmt2(x: f64) -> String {
    format!("{:.2}", truncate2(x))
}

/// Rates per group and budget, plus the same over all entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub groups: BTreeMap<Group, BTreeMap<u32, f64>>,
    pub overall: BTreeMap<u32, f64>,
}

impl RateTable {
    pub fn get(&self, group: Group, budget: u32) -> Option<f64> {
        self.groups.get(&group)?.get(&budget).copied()
    }
}

/// Rates per group and over all entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub groups: BTreeMap<Group, f64>,
    pub overall: Option<f64>,
}

fn budgets(raw: &[RawResult]) -> BTreeSet<u32> {
    raw.iter().map(|r| r.budget).collect()
}

/// An entry counts at budget k once any of its runs with budget <= k succeeded.
fn cumulative(raw: &[RawResult], success: impl Fn(&RawResult) -> bool) -> RateTable {
    let budgets = budgets(raw);
    let mut members: BTreeMap<Group, BTreeSet<usize>> = BTreeMap::new();
    let mut first: BTreeMap<usize, u32> = BTreeMap::new();
    for r in raw {
        members.entry(r.group).or_default().insert(r.entry);
        if success(r) {
            let b = first.entry(r.entry).or_insert(r.budget);
            *b = (*b).min(r.budget);
        }
    }
    let count = |entries: &mut dyn Iterator<Item = &usize>, k: u32| {
        entries.filter(|e| first.get(e).is_some_and(|&b| b <= k)).count()
    };
    let mut table = RateTable::default();
    let all: usize = members.values().map(BTreeSet::len).sum();
    for &k in &budgets {
        for (g, entries) in &members {
            let n = count(&mut entries.iter(), k);
            if let Some(v) = rate(n, entries.len()) {
                table.groups.entry(*g).or_default().insert(k, v);
            }
        }
        let n = count(&mut members.values().flatten(), k);
        if let Some(v) = rate(n, all) {
            table.overall.insert(k, v);
        }
    }
    table
}

/// Share of entries approved by the reviewer within each budget.
pub fn compute_ocr(raw: &[RawResult]) -> RateTable {
    cumulative(raw, |r| r.approved)
}

/// Share of entries whose plan ran to the end within each budget.
pub fn compute_ser(raw: &[RawResult]) -> RateTable {
    cumulative(raw, |r| r.executed)
}

/// Runs at the largest budget present, one per entry.
fn final_runs(raw: &[RawResult]) -> Vec<&RawResult> {
    let Some(max) = raw.iter().map(|r| r.budget).max() else {
        return Vec::new();
    };
    raw.iter().filter(|r| r.budget == max).collect()
}

fn group_rates(runs: &[&RawResult], num: impl Fn(&RawResult) -> usize, den: impl Fn(&RawResult) -> usize) -> GroupRates {
    let mut sums: BTreeMap<Group, (usize, usize)> = BTreeMap::new();
    for r in runs {
        let s = sums.entry(r.group).or_default();
        s.0 += num(r);
        s.1 += den(r);
    }
    let groups = sums
        .iter()
        .filter_map(|(g, (n, d))| rate(*n, *d).map(|v| (*g, v)))
        .collect();
    let (n, d) = sums.values().fold((0, 0), |acc, (n, d)| (acc.0 + n, acc.1 + d));
    GroupRates {
        groups,
        overall: rate(n, d),
    }
}

/// Skills given to the same agent as the rule-based reference, over all skills.
pub fn compute_casr(raw: &[RawResult]) -> GroupRates {
    group_rates(&final_runs(raw), RawResult::correct_skills, RawResult::total_skills)
}

/// Entries whose allocated plan ran to the end at minimal cost, over all entries.
pub fn compute_oer(raw: &[RawResult]) -> GroupRates {
    group_rates(&final_runs(raw), |r| r.optimal as usize, |_| 1)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdKind {
    /// Divides by n - 1.
    #[default]
    Sample,
    /// Divides by n.
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn display(&self) -> String {
        format!("{}±{}", fmt2(self.mean), fmt2(self.std))
    }
}

pub fn mean_std(values: &[f64], kind: StdKind) -> Option<MeanStd> {
    let n = values.len();
    let den = match kind {
        StdKind::Sample => n.checked_sub(1)?,
        StdKind::Population => n,
    };
    if den == 0 {
        return None;
    }
    if values.iter().all(|v| *v == values[0]) {
        return Some(MeanStd {
            mean: values[0],
            std: 0.0,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Some(MeanStd {
        mean,
        std: (ss / den as f64).sqrt(),
    })
}

/// Mean and spread across groups, per budget.
pub fn stochastic_stats(table: &RateTable, kind: StdKind) -> Result<BTreeMap<u32, MeanStd>, HarnessError> {
    if table.groups.len() < 2 {
        return Err(HarnessError::TooFewGroups(table.groups.len()));
    }
    let budgets: BTreeSet<u32> = table.groups.values().flat_map(|m| m.keys().copied()).collect();
    let mut out = BTreeMap::new();
    for k in budgets {
        let values: Vec<f64> = table.groups.values().filter_map(|m| m.get(&k).copied()).collect();
        if values.len() < 2 {
            return Err(HarnessError::TooFewGroups(values.len()));
        }
        out.insert(k, mean_std(&values, kind).expect("two or more values"));
    }
    Ok(out)
}
