use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_casr, compute_ocr, compute_oer, compute_ser, fmt2, stochastic_stats};
use super::{Group, GroupRates, MeanStd, RateTable, RawResult, StdKind};
use crate::allocation::AllocMode;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub kind: StdKind,
    /// Empty when fewer than two groups have results.
    pub ocr: BTreeMap<u32, MeanStd>,
    pub ser: BTreeMap<u32, MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub suite: String,
    pub backend: String,
    pub alloc: AllocMode,
    pub budgets: Vec<u32>,
    pub entries: usize,
    pub failed_runs: usize,
    pub ocr: RateTable,
    pub ser: RateTable,
    pub casr: GroupRates,
    pub oer: GroupRates,
    pub stats: Stats,
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt2).unwrap_or_else(|| "-".into())
}

impl MetricsReport {
    pub fn from_raw(suite: &str, backend: &str, alloc: AllocMode, raw: &[RawResult], kind: StdKind) -> MetricsReport {
        let mut budgets: Vec<u32> = raw.iter().map(|r| r.budget).collect();
        budgets.sort_unstable();
        budgets.dedup();
        let mut entries: Vec<usize> = raw.iter().map(|r| r.entry).collect();
        entries.sort_unstable();
        entries.dedup();
        let ocr = compute_ocr(raw);
        let ser = compute_ser(raw);
        let stats = Stats {
            kind,
            ocr: stochastic_stats(&ocr, kind).unwrap_or_default(),
            ser: stochastic_stats(&ser, kind).unwrap_or_default(),
        };
        MetricsReport {
            suite: suite.to_string(),
            backend: backend.to_string(),
            alloc,
            budgets,
            entries: entries.len(),
            failed_runs: raw.iter().filter(|r| r.failure.is_some()).count(),
            casr: compute_casr(raw),
            oer: compute_oer(raw),
            ocr,
            ser,
            stats,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    fn budget_table(out: &mut String, name: &str, table: &RateTable, stats: &BTreeMap<u32, MeanStd>, budgets: &[u32]) {
        let _ = write!(out, "{:<6}", "k");
        for g in Group::ALL {
            let _ = write!(out, "{:>9}", format!("{}-{name}", g.prefix()));
        }
        let _ = writeln!(out, "{:>12}", "Mean±STD");
        for &k in budgets.iter().rev() {
            let _ = write!(out, "{k:<6}");
            for g in Group::ALL {
                let _ = write!(out, "{:>9}", cell(table.get(g, k)));
            }
            let ms = stats.get(&k).map(MeanStd::display).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{ms:>12}");
        }
    }

    fn group_row(out: &mut String, name: &str, label: &str, rates: &GroupRates) {
        let _ = write!(out, "{:<8}", "");
        for g in Group::ALL {
            let _ = write!(out, "{:>9}", format!("{}-{name}", g.prefix()));
        }
        let _ = writeln!(out, "{:>14}", format!("Overall-{name}"));
        let _ = write!(out, "{label:<8}");
        for g in Group::ALL {
            let _ = write!(out, "{:>9}", cell(rates.groups.get(&g).copied()));
        }
        let _ = writeln!(out, "{:>14}", cell(rates.overall));
    }

    /// Plain-text tables laid out like the published ones.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "suite {} | backend {} | allocation {} | {} entries | {} failed runs\n",
            self.suite,
            self.backend,
            self.alloc.name(),
            self.entries,
            self.failed_runs
        );
        let _ = writeln!(out, "OCR");
        Self::budget_table(&mut out, "OCR", &self.ocr, &self.stats.ocr, &self.budgets);
        let _ = writeln!(out, "\nSER");
        Self::budget_table(&mut out, "SER", &self.ser, &self.stats.ser, &self.budgets);
        let label = self.alloc.name();
        let _ = writeln!(out, "\nCASR");
        Self::group_row(&mut out, "CASR", label, &self.casr);
        let _ = writeln!(out, "\nOER");
        Self::group_row(&mut out, "OER", label, &self.oer);
        out
    }
}
