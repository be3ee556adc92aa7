//! Target-reduction metrics: CTR/RTR totals, per-site distributions,
//! gadget availability, baseline normalization, and policy ranking.
//!
//! Counts and totals are exact integers; averages are kept as exact
//! rationals until display; percentages are fixed-point hundredths
//! rounded half-up, so rendered reports are reproducible bit for bit.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::facts::{GadgetAnnotations, ProgramFacts};
use crate::policy::{PolicyId, TargetSet};

/// Fixed-point value with two decimal places (stored in hundredths).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Decimal2(i64);

impl Decimal2 {
    pub const ZERO: Decimal2 = Decimal2(0);

    pub fn from_hundredths(h: i64) -> Self {
        Decimal2(h)
    }

    pub fn hundredths(self) -> i64 {
        self.0
    }

    /// `num / den` rounded half-up to two decimals. `den` must be > 0.
    pub fn from_ratio_half_up(num: u128, den: u128) -> Self {
        debug_assert!(den > 0);
        let h = (200 * num + den) / (2 * den);
        Decimal2(h as i64)
    }

    /// Round a non-negative float half-up to two decimals.
    pub fn from_f64_half_up(x: f64) -> Self {
        debug_assert!(x >= 0.0);
        Decimal2((x * 100.0 + 0.5) as i64)
    }

    /// Saturating integer multiple, used by scale-invariance checks.
    pub fn scale(self, k: i64) -> Self {
        Decimal2(self.0.saturating_mul(k))
    }
}

impl fmt::Display for Decimal2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDecimalError(pub String);

impl fmt::Display for ParseDecimalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not a 2-decimal number: {}", self.0)
    }
}

impl core::error::Error for ParseDecimalError {}

impl FromStr for Decimal2 {
    type Err = ParseDecimalError;

    /// Accepts `D`, `D.d` and `D.dd` forms; anything longer would lose
    /// precision and is rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseDecimalError(String::from(s));
        let (sign, rest) = match s.strip_prefix('-') {
            Some(r) => (-1i64, r),
            None => (1i64, s),
        };
        let (int_part, frac_part) = match rest.split_once('.') {
            Some((i, f)) => (i, f),
            None => (rest, ""),
        };
        if int_part.is_empty() || frac_part.len() > 2 {
            return Err(bad());
        }
        let int: i64 = int_part.parse().map_err(|_| bad())?;
        let frac: i64 = if frac_part.is_empty() {
            0
        } else {
            let parsed: i64 = frac_part.parse().map_err(|_| bad())?;
            if frac_part.len() == 1 {
                parsed * 10
            } else {
                parsed
            }
        };
        Ok(Decimal2(sign * (int * 100 + frac)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    ZeroBaseline,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::ZeroBaseline => f.write_str("baseline is zero"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Normalize `value` against `baseline` as a percentage, rounded half-up
/// to two decimals.
pub fn normalize(value: u64, baseline: u64) -> Result<Decimal2, MetricsError> {
    if baseline == 0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(Decimal2::from_ratio_half_up(
        100 * value as u128,
        baseline as u128,
    ))
}

/// Per-site value distribution with the aggregate statistics the reports
/// print. Values stay in site order; aggregates use a sorted copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distribution {
    values: Vec<u64>,
    sorted: Vec<u64>,
    sum: u128,
}

impl Distribution {
    pub fn new(values: Vec<u64>) -> Self {
        let mut sorted = values.clone();
        sorted.sort_unstable();
        let sum = values.iter().map(|&v| v as u128).sum();
        Distribution {
            values,
            sorted,
            sum,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn sum(&self) -> u128 {
        self.sum
    }

    pub fn min(&self) -> Option<u64> {
        self.sorted.first().copied()
    }

    pub fn max(&self) -> Option<u64> {
        self.sorted.last().copied()
    }

    /// Lower-middle element for even lengths; no interpolation.
    pub fn median(&self) -> Option<u64> {
        let n = self.values.len();
        if n == 0 {
            return None;
        }
        Some(self.sorted[n.div_ceil(2) - 1])
    }

    /// The smallest value v such that at least 90% of all values are
    /// <= v: the ceil(0.9 n)-th order statistic (1-based, ascending).
    pub fn p90(&self) -> Option<u64> {
        let n = self.values.len();
        if n == 0 {
            return None;
        }
        let rank = (9 * n).div_ceil(10);
        Some(self.sorted[rank - 1])
    }

    /// Exact average as (sum, n).
    pub fn average(&self) -> Option<(u128, u64)> {
        if self.values.is_empty() {
            None
        } else {
            Some((self.sum, self.values.len() as u64))
        }
    }

    /// Average rounded half-up to an integer, as the raw tables print it.
    pub fn average_rounded(&self) -> Option<u64> {
        let (sum, n) = self.average()?;
        Some(((2 * sum + n as u128) / (2 * n as u128)) as u64)
    }

    /// Population standard deviation (divide by n). The inner term is
    /// computed in exact integer arithmetic.
    pub fn sd(&self) -> Option<f64> {
        let n = self.values.len() as u128;
        if n == 0 {
            return None;
        }
        let sum_sq: u128 = self.values.iter().map(|&v| (v as u128) * (v as u128)).sum();
        let m = n * sum_sq - self.sum * self.sum;
        Some(sqrt_f64(m as f64) / n as f64)
    }
}

/// Newton square root for the `no_std` build; exact enough that the
/// result differs from a perfect sqrt by at most a few ulps.
fn sqrt_f64(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    // Halve the exponent for the seed, then refine.
    let mut y = f64::from_bits((x.to_bits() >> 1) + 0x1FF8_0000_0000_0000);
    for _ in 0..6 {
        y = 0.5 * (y + x / y);
    }
    y
}

/// CTR: the summed size of the legitimate target set over all analyzed
/// callsites, with its per-callsite distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CtrSummary {
    pub total: u128,
    pub distribution: Distribution,
}

/// Compute CTR from per-callsite sizes already ordered by callsite id.
pub fn ctr_from_sizes(sizes: Vec<u64>) -> CtrSummary {
    let distribution = Distribution::new(sizes);
    CtrSummary {
        total: distribution.sum(),
        distribution,
    }
}

/// Compute CTR from materialized target sets.
pub fn ctr(target_sets: &[TargetSet]) -> CtrSummary {
    let mut sized: Vec<(&crate::facts::CallsiteId, u64)> = target_sets
        .iter()
        .map(|ts| (&ts.callsite, ts.size() as u64))
        .collect();
    sized.sort_by_key(|(id, _)| *id);
    ctr_from_sizes(sized.into_iter().map(|(_, s)| s).collect())
}

/// RTR: per return site (one per function with at least one return), how
/// many analyzed callsites may legitimately reach the function, plus any
/// direct callsites the facts recorded. The distribution is ordered by
/// function id.
#[derive(Debug, Clone, PartialEq)]
pub struct RtrSummary {
    pub total: u128,
    pub distribution: Distribution,
}

pub fn rtr(facts: &ProgramFacts, target_sets: &[TargetSet]) -> RtrSummary {
    let mut indirect: BTreeMap<&crate::facts::FunctionId, u64> = BTreeMap::new();
    for ts in target_sets {
        for f in &ts.members {
            if let Some((id, _)) = facts.functions.get_key_value(f) {
                *indirect.entry(id).or_insert(0) += 1;
            }
        }
    }
    let values: Vec<u64> = facts
        .functions
        .values()
        .filter(|f| f.has_return)
        .map(|f| indirect.get(&f.id).copied().unwrap_or(0) + f.direct_call_count)
        .collect();
    let distribution = Distribution::new(values);
    RtrSummary {
        total: distribution.sum(),
        distribution,
    }
}

/// fCGA: how many allowed forward targets carry a forward gadget,
/// summed over callsites.
pub fn fcga(target_sets: &[TargetSet], gadgets: &GadgetAnnotations) -> u128 {
    target_sets
        .iter()
        .map(|ts| {
            ts.members
                .iter()
                .filter(|f| gadgets.get(f).has_forward_gadget)
                .count() as u128
        })
        .sum()
}

/// bCGA: over all return sites, how many allowed return-target callsites
/// sit in a function carrying a return gadget. Callsites without a
/// recorded enclosing function contribute nothing.
pub fn bcga(facts: &ProgramFacts, target_sets: &[TargetSet], gadgets: &GadgetAnnotations) -> u128 {
    target_sets
        .iter()
        .filter_map(|ts| {
            let cs = facts.callsite(&ts.callsite)?;
            let encl = cs.enclosing_function.as_ref()?;
            if !gadgets.get(encl).has_return_gadget {
                return None;
            }
            let return_sites = ts
                .members
                .iter()
                .filter(|f| facts.function(f).map(|r| r.has_return).unwrap_or(false))
                .count();
            Some(return_sites as u128)
        })
        .sum()
}

/// Which unconstrained target count a policy is normalized against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    AllFunctions,
    VirtualFunctions,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::AllFunctions => "all-functions",
            BaselineKind::VirtualFunctions => "virtual-functions",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Normalized Avg/SD/90p aggregates (percent of baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizedAggregates {
    pub avg: Decimal2,
    pub sd: Decimal2,
    pub p90: Decimal2,
}

/// Normalize a distribution's aggregates against `baseline`. `None` for
/// an empty distribution.
pub fn normalized_aggregates(
    dist: &Distribution,
    baseline: u64,
) -> Result<Option<NormalizedAggregates>, MetricsError> {
    if baseline == 0 {
        return Err(MetricsError::ZeroBaseline);
    }
    let (sum, n) = match dist.average() {
        Some(a) => a,
        None => return Ok(None),
    };
    let avg = Decimal2::from_ratio_half_up(100 * sum, n as u128 * baseline as u128);
    let p90 = normalize(dist.p90().unwrap(), baseline)?;
    let sd = Decimal2::from_f64_half_up(100.0 * dist.sd().unwrap() / baseline as f64);
    Ok(Some(NormalizedAggregates { avg, sd, p90 }))
}

/// One policy's normalized aggregates, as fed to the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyAggregates {
    pub policy: PolicyId,
    pub avg: Decimal2,
    pub sd: Decimal2,
    pub p90: Decimal2,
}

/// Ranking outcome: best (smallest average) first, with a note for every
/// tie that had to be broken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    pub order: Vec<PolicyAggregates>,
    pub trace: Vec<String>,
}

/// Rank policies ascending by normalized average; ties break by
/// ascending 90th percentile, then ascending SD, then enumeration order.
pub fn rank(aggregates: &[PolicyAggregates]) -> Ranking {
    let mut order: Vec<PolicyAggregates> = aggregates.to_vec();
    order.sort_by_key(|a| (a.avg, a.p90, a.sd, a.policy.number()));

    let mut trace = Vec::new();
    for pair in order.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.avg != b.avg {
            continue;
        }
        let note = if a.p90 != b.p90 {
            format!(
                "{} before {}: averages tie at {}, 90th percentile {} < {}",
                a.policy, b.policy, a.avg, a.p90, b.p90
            )
        } else if a.sd != b.sd {
            format!(
                "{} before {}: averages and 90th percentiles tie, SD {} < {}",
                a.policy, b.policy, a.sd, b.sd
            )
        } else {
            format!(
                "{} before {}: all aggregates tie, enumeration order decides",
                a.policy, b.policy
            )
        };
        trace.push(note);
    }
    Ranking { order, trace }
}
