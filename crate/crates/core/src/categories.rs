//! SmPC / CIOMS AE frequency categories.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyCategory {
    VeryRare,
    Rare,
    Uncommon,
    Common,
    VeryCommon,
}

impl FrequencyCategory {
    pub const ALL: [FrequencyCategory; 5] = [
        FrequencyCategory::VeryRare,
        FrequencyCategory::Rare,
        FrequencyCategory::Uncommon,
        FrequencyCategory::Common,
        FrequencyCategory::VeryCommon,
    ];

    /// Lower-inclusive thresholds of Rare, Uncommon, Common and VeryCommon.
    pub const THRESHOLDS: [f64; 4] = [0.0001, 0.001, 0.01, 0.1];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn id(self) -> &'static str {
        match self {
            FrequencyCategory::VeryRare => "very_rare",
            FrequencyCategory::Rare => "rare",
            FrequencyCategory::Uncommon => "uncommon",
            FrequencyCategory::Common => "common",
            FrequencyCategory::VeryCommon => "very_common",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FrequencyCategory::VeryRare => "very rare",
            FrequencyCategory::Rare => "rare",
            FrequencyCategory::Uncommon => "uncommon",
            FrequencyCategory::Common => "common",
            FrequencyCategory::VeryCommon => "very common",
        }
    }
}

impl fmt::Display for FrequencyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn categorize<T: Real>(p: T) -> Result<FrequencyCategory> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::ProbabilityOutOfRange(p.to_f64_lossy()));
    }
    let idx = FrequencyCategory::THRESHOLDS
        .iter()
        .take_while(|&&t| p >= T::lit(t))
        .count();
    Ok(FrequencyCategory::ALL[idx])
}

/// Counts of (comparison, reference) category pairs. Rows index the
/// comparison estimator, columns the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CategoryCrosstab {
    pub counts: [[u64; 5]; 5],
}

impl CategoryCrosstab {
    pub fn add(&mut self, comparison: FrequencyCategory, reference: FrequencyCategory) {
        self.counts[comparison.index()][reference.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal(&self) -> u64 {
        (0..5).map(|i| self.counts[i][i]).sum()
    }

    /// Off-diagonal entries: category changes relative to the reference.
    pub fn switches(&self) -> u64 {
        self.total() - self.diagonal()
    }

    /// Comparison category higher than the reference.
    pub fn upward_switches(&self) -> u64 {
        (0..5).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| self.counts[i][j]).sum()
    }

    /// Comparison category lower than the reference.
    pub fn downward_switches(&self) -> u64 {
        (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).map(|(i, j)| self.counts[i][j]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("comparison\\reference");
        for c in FrequencyCategory::ALL {
            out.push(',');
            out.push_str(c.id());
        }
        out.push('\n');
        for (row, c) in self.counts.iter().zip(FrequencyCategory::ALL) {
            out.push_str(c.id());
            for n in row {
                let _ = write!(out, ",{n}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text_table(&self) -> String {
        let width = FrequencyCategory::ALL
            .iter()
            .map(|c| c.label().len())
            .max()
            .unwrap_or(0)
            .max(self.total().to_string().len());
        let mut out = format!("{:>width$}", "");
        for c in FrequencyCategory::ALL {
            let _ = write!(out, " {:>width$}", c.label());
        }
        out.push('\n');
        for (row, c) in self.counts.iter().zip(FrequencyCategory::ALL) {
            let _ = write!(out, "{:>width$}", c.label());
            for n in row {
                let _ = write!(out, " {n:>width$}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "switches: {} of {}", self.switches(), self.total());
        out
    }
}

pub fn crosstab<I>(pairs: I) -> CategoryCrosstab
where
    I: IntoIterator<Item = (FrequencyCategory, FrequencyCategory)>,
{
    let mut t = CategoryCrosstab::default();
    for (a, b) in pairs {
        t.add(a, b);
    }
    t
}
