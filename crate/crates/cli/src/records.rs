//! Per-trial CSV rows and their aggregation.
//!
//! Aggregates are pure functions of the rows: every aggregate first sorts its
//! input by `(n, L, trial, index)`, so any permutation or split-and-merge of
//! the rows reproduces the same numbers bit for bit.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use lowedge_core::field::MixingEstimate;
use lowedge_core::observables::rate_estimate;
use lowedge_core::stats::{mean, median, BernoulliTally, Proportion};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub distance: u64,
    pub trial: u64,
    pub seed: u64,
    pub v_origin: Option<f64>,
    pub v_far: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    #[serde(rename = "L")]
    pub l: u64,
    pub volume: usize,
    pub trial: u64,
    pub seed: u64,
    pub average: Option<f64>,
    pub hit: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub trial: u64,
    pub seed: u64,
    pub threshold: f64,
    pub e0: Option<f64>,
    pub hit: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtRow {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub trial: u64,
    pub seed: u64,
    pub eta: f64,
    pub energy: Option<f64>,
    pub ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsaRow {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: u64,
    pub trial: u64,
    pub seed: u64,
    /// `L^{-2p·4^{N-n}}`.
    pub target: f64,
    pub e0: Option<f64>,
    pub shortcut: Option<bool>,
    pub singular: Option<bool>,
    pub first_singular_energy: Option<f64>,
    pub singular_resolvent: Option<bool>,
    pub chain_certified: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub trial: u64,
    pub seed: u64,
    pub index: usize,
    pub eigenvalue: Option<f64>,
    /// Localization centre, coordinates joined by `;`.
    pub center: Option<String>,
    pub fitted_rate: Option<f64>,
    pub r_lo: Option<usize>,
    pub r_hi: Option<usize>,
    pub degenerate: Option<bool>,
    /// Shell maxima `A_0;A_1;...`.
    pub shell_max: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynlocRow {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub trial: u64,
    pub seed: u64,
    pub index: usize,
    pub time: f64,
    pub moment: Option<f64>,
    pub bound: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub trial: u64,
    pub seed: u64,
    pub e0: Option<f64>,
    pub error: Option<String>,
}

/// All rows of one run.
#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    FieldCertify(Vec<MixingRow>),
    LargeDeviation(Vec<DeviationRow>),
    Lifshitz(Vec<TailRow>),
    CtCheck(Vec<CtRow>),
    MsaInitial(Vec<MsaRow>),
    EigenDecay(Vec<DecayRow>),
    Dynloc(Vec<DynlocRow>),
    SpectralEdge(Vec<EdgeRow>),
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: DeserializeOwned>(r: R) -> csv::Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// `(failed, total)` over distinct `(group, trial)` units.
fn failures<T>(rows: &[T], unit: impl Fn(&T) -> (u64, u64, u64), failed: impl Fn(&T) -> bool) -> (usize, usize) {
    let mut units: BTreeMap<(u64, u64, u64), bool> = BTreeMap::new();
    for r in rows {
        *units.entry(unit(r)).or_default() |= failed(r);
    }
    (units.values().filter(|f| **f).count(), units.len())
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::FieldCertify(r) => r.len(),
            Records::LargeDeviation(r) => r.len(),
            Records::Lifshitz(r) => r.len(),
            Records::CtCheck(r) => r.len(),
            Records::MsaInitial(r) => r.len(),
            Records::EigenDecay(r) => r.len(),
            Records::Dynloc(r) => r.len(),
            Records::SpectralEdge(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        match self {
            Records::FieldCertify(r) => write_rows(w, r),
            Records::LargeDeviation(r) => write_rows(w, r),
            Records::Lifshitz(r) => write_rows(w, r),
            Records::CtCheck(r) => write_rows(w, r),
            Records::MsaInitial(r) => write_rows(w, r),
            Records::EigenDecay(r) => write_rows(w, r),
            Records::Dynloc(r) => write_rows(w, r),
            Records::SpectralEdge(r) => write_rows(w, r),
        }
    }

    /// Parses a records file written by [`Records::write_csv`].
    pub fn read_csv<R: Read>(kind: ExperimentKind, r: R) -> csv::Result<Records> {
        Ok(match kind {
            ExperimentKind::FieldCertify => Records::FieldCertify(read_rows(r)?),
            ExperimentKind::LargeDeviation => Records::LargeDeviation(read_rows(r)?),
            ExperimentKind::Lifshitz => Records::Lifshitz(read_rows(r)?),
            ExperimentKind::CtCheck => Records::CtCheck(read_rows(r)?),
            ExperimentKind::MsaInitial => Records::MsaInitial(read_rows(r)?),
            ExperimentKind::EigenDecay => Records::EigenDecay(read_rows(r)?),
            ExperimentKind::Dynloc => Records::Dynloc(read_rows(r)?),
            ExperimentKind::SpectralEdge => Records::SpectralEdge(read_rows(r)?),
        })
    }

    /// Failed and total trial units.
    pub fn failures(&self) -> (usize, usize) {
        match self {
            Records::FieldCertify(r) => failures(r, |x| (0, x.distance, x.trial), |x| x.error.is_some()),
            Records::LargeDeviation(r) => failures(r, |x| (0, x.l, x.trial), |x| x.error.is_some()),
            Records::Lifshitz(r) => failures(r, |x| (x.n as u64, x.l as u64, x.trial), |x| x.error.is_some()),
            Records::CtCheck(r) => failures(r, |x| (x.n as u64, x.l as u64, x.trial), |x| x.error.is_some()),
            Records::MsaInitial(r) => failures(r, |x| (x.n as u64, x.l, x.trial), |x| x.error.is_some()),
            Records::EigenDecay(r) => failures(r, |x| (x.n as u64, x.l as u64, x.trial), |x| x.error.is_some()),
            Records::Dynloc(r) => failures(r, |x| (x.n as u64, x.l as u64, x.trial), |x| x.error.is_some()),
            Records::SpectralEdge(r) => failures(r, |x| (x.n as u64, x.l as u64, x.trial), |x| x.error.is_some()),
        }
    }

    /// Recomputes the aggregates from the rows alone.
    pub fn aggregate(&self) -> Aggregates {
        match self {
            Records::FieldCertify(r) => Aggregates::FieldCertify(aggregate_mixing(r)),
            Records::LargeDeviation(r) => Aggregates::LargeDeviation(aggregate_deviation(r)),
            Records::Lifshitz(r) => Aggregates::Lifshitz(aggregate_tail(r)),
            Records::CtCheck(r) => Aggregates::CtCheck(aggregate_ct(r)),
            Records::MsaInitial(r) => Aggregates::MsaInitial(aggregate_msa(r)),
            Records::EigenDecay(r) => Aggregates::EigenDecay(aggregate_decay(r)),
            Records::Dynloc(r) => Aggregates::Dynloc(aggregate_dynloc(r)),
            Records::SpectralEdge(r) => Aggregates::SpectralEdge(aggregate_edge(r)),
        }
    }

    /// Concatenates partial runs of the same kind (aggregation is unaffected
    /// by the order of the parts).
    pub fn merge(self, other: Records) -> Option<Records> {
        use Records::*;
        Some(match (self, other) {
            (FieldCertify(mut a), FieldCertify(b)) => {
                a.extend(b);
                FieldCertify(a)
            }
            (LargeDeviation(mut a), LargeDeviation(b)) => {
                a.extend(b);
                LargeDeviation(a)
            }
            (Lifshitz(mut a), Lifshitz(b)) => {
                a.extend(b);
                Lifshitz(a)
            }
            (CtCheck(mut a), CtCheck(b)) => {
                a.extend(b);
                CtCheck(a)
            }
            (MsaInitial(mut a), MsaInitial(b)) => {
                a.extend(b);
                MsaInitial(a)
            }
            (EigenDecay(mut a), EigenDecay(b)) => {
                a.extend(b);
                EigenDecay(a)
            }
            (Dynloc(mut a), Dynloc(b)) => {
                a.extend(b);
                Dynloc(a)
            }
            (SpectralEdge(mut a), SpectralEdge(b)) => {
                a.extend(b);
                SpectralEdge(a)
            }
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Aggregates {
    FieldCertify(Vec<MixingEstimate>),
    LargeDeviation(DeviationAggregate),
    Lifshitz(Vec<TailAggregate>),
    CtCheck(Vec<CtAggregate>),
    MsaInitial(Vec<MsaSummary>),
    EigenDecay(Vec<DecayAggregate>),
    Dynloc(DynlocAggregate),
    SpectralEdge(Vec<EdgeAggregate>),
}

fn sorted<T: Clone, K: Ord>(rows: &[T], key: impl Fn(&T) -> K) -> Vec<T> {
    let mut v = rows.to_vec();
    v.sort_by_key(|r| key(r));
    v
}

fn aggregate_mixing(rows: &[MixingRow]) -> Vec<MixingEstimate> {
    let rows = sorted(rows, |r| (r.distance, r.trial));
    let mut by_distance: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &rows {
        if let (Some(a), Some(b)) = (r.v_origin, r.v_far) {
            by_distance.entry(r.distance).or_default().push((a, b));
        }
    }
    by_distance.into_iter().map(|(d, pairs)| MixingEstimate::from_pairs(d, &pairs)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationAggregate {
    #[serde(rename = "L")]
    pub l: u64,
    pub volume: usize,
    pub proportion: Proportion,
    /// `-ln(p̂)/|C_L|`.
    pub rate: f64,
}

fn aggregate_deviation(rows: &[DeviationRow]) -> DeviationAggregate {
    let tally = BernoulliTally::from_outcomes(rows.iter().filter_map(|r| r.hit));
    let volume = rows.first().map_or(0, |r| r.volume);
    let proportion = tally.proportion();
    DeviationAggregate {
        l: rows.first().map_or(0, |r| r.l),
        volume,
        proportion,
        rate: rate_estimate(&proportion, volume),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailAggregate {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub threshold: f64,
    pub proportion: Proportion,
    /// `-ln(p̂)/ln L`.
    pub log_ratio: f64,
}

fn aggregate_tail(rows: &[TailRow]) -> Vec<TailAggregate> {
    let mut groups: BTreeMap<(usize, usize), (f64, BernoulliTally)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.n, r.l)).or_insert((r.threshold, BernoulliTally::default()));
        if let Some(h) = r.hit {
            g.1.record(h);
        }
    }
    groups
        .into_iter()
        .map(|((n, l), (threshold, t))| {
            let proportion = t.proportion();
            TailAggregate { n, l, threshold, proportion, log_ratio: -proportion.estimate.ln() / (l as f64).ln() }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtAggregate {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub instances: usize,
    pub max_ratio: f64,
    /// Instances with ratio above `1 + 1e-12`.
    pub violations: usize,
}

fn aggregate_ct(rows: &[CtRow]) -> Vec<CtAggregate> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.n, r.l)).or_default();
        if let Some(x) = r.ratio {
            g.push(x);
        }
    }
    groups
        .into_iter()
        .map(|((n, l), ratios)| CtAggregate {
            n,
            l,
            instances: ratios.len(),
            max_ratio: ratios.iter().copied().fold(0.0, f64::max),
            violations: ratios.iter().filter(|&&x| x > 1.0 + 1e-12).count(),
        })
        .collect()
}

/// One row of the per-scale summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsaSummary {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: u64,
    pub trials: u64,
    pub singular_count: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub shortcut_rate: f64,
    pub target: f64,
}

fn aggregate_msa(rows: &[MsaRow]) -> Vec<MsaSummary> {
    let mut groups: BTreeMap<(usize, u64), (BernoulliTally, u64, f64)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.n, r.l)).or_insert((BernoulliTally::default(), 0, r.target));
        if let Some(s) = r.singular {
            g.0.record(s);
            g.1 += r.shortcut.unwrap_or(false) as u64;
        }
    }
    groups
        .into_iter()
        .map(|((n, l), (t, shortcuts, target))| {
            let p = t.proportion();
            MsaSummary {
                n,
                l,
                trials: t.trials,
                singular_count: t.hits,
                estimate: p.estimate,
                ci_low: p.ci_low,
                ci_high: p.ci_high,
                shortcut_rate: if t.trials == 0 { 0.0 } else { shortcuts as f64 / t.trials as f64 },
                target,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayAggregate {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub fits: usize,
    pub degenerate: usize,
    pub median_rate: f64,
    pub mean_rate: f64,
}

fn aggregate_decay(rows: &[DecayRow]) -> Vec<DecayAggregate> {
    let rows = sorted(rows, |r| (r.n, r.l, r.trial, r.index));
    let mut groups: BTreeMap<(usize, usize), (Vec<f64>, usize)> = BTreeMap::new();
    for r in &rows {
        let g = groups.entry((r.n, r.l)).or_default();
        match (r.fitted_rate, r.degenerate) {
            (Some(x), _) => g.0.push(x),
            (None, Some(true)) => g.1 += 1,
            _ => {}
        }
    }
    groups
        .into_iter()
        .map(|((n, l), (rates, degenerate))| DecayAggregate {
            n,
            l,
            fits: rates.len(),
            degenerate,
            median_rate: median(&rates),
            mean_rate: mean(&rates),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynlocTime {
    pub time: f64,
    pub mean_moment: f64,
    pub max_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynlocAggregate {
    pub per_time: Vec<DynlocTime>,
    /// `sup_t M(t)` over all trials.
    pub sup: f64,
    /// Mean of the per-trial correlator bounds.
    pub mean_bound: f64,
    /// Evaluations with `M(t) > B (1 + 1e-12)`.
    pub bound_violations: usize,
}

fn aggregate_dynloc(rows: &[DynlocRow]) -> DynlocAggregate {
    let rows = sorted(rows, |r| (r.n, r.l, r.trial, r.index));
    let mut per_time: BTreeMap<usize, (f64, Vec<f64>)> = BTreeMap::new();
    let mut bounds: BTreeMap<u64, f64> = BTreeMap::new();
    let mut violations = 0;
    for r in &rows {
        if let (Some(m), Some(b)) = (r.moment, r.bound) {
            per_time.entry(r.index).or_insert((r.time, Vec::new())).1.push(m);
            bounds.insert(r.trial, b);
            violations += (m > b * (1.0 + 1e-12)) as usize;
        }
    }
    let per_time: Vec<DynlocTime> = per_time
        .into_values()
        .map(|(time, ms)| DynlocTime {
            time,
            mean_moment: mean(&ms),
            max_moment: ms.iter().copied().fold(0.0, f64::max),
        })
        .collect();
    DynlocAggregate {
        sup: per_time.iter().map(|t| t.max_moment).fold(0.0, f64::max),
        mean_bound: mean(&bounds.into_values().collect::<Vec<_>>()),
        per_time,
        bound_violations: violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeAggregate {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub trials: usize,
    pub min_e0: f64,
    pub mean_e0: f64,
}

fn aggregate_edge(rows: &[EdgeRow]) -> Vec<EdgeAggregate> {
    let rows = sorted(rows, |r| (r.n, r.l, r.trial));
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        let g = groups.entry((r.n, r.l)).or_default();
        if let Some(e) = r.e0 {
            g.push(e);
        }
    }
    groups
        .into_iter()
        .map(|((n, l), e0)| EdgeAggregate {
            n,
            l,
            trials: e0.len(),
            min_e0: e0.iter().copied().fold(f64::INFINITY, f64::min),
            mean_e0: mean(&e0),
        })
        .collect()
}
