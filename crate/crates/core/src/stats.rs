//! Timing aggregation, histograms, speedups and pooled two-sample t-tests.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::beta::checked_beta_reg;

use crate::error::{Error, Result};

/// Timings of one step, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub step_index: usize,
    pub batch_time: u64,
    pub update_time: u64,
    pub combined_time: u64,
}

impl TimingRecord {
    pub fn new(step_index: usize, batch_time: u64, update_time: u64) -> Self {
        TimingRecord {
            step_index,
            batch_time,
            update_time,
            combined_time: batch_time + update_time,
        }
    }
}

/// Mean, median and sample standard deviation of a set of values.
///
/// `degenerate` is set when there is a single value, in which case `std` is
/// reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = values.len();
        let mean = mean(values);
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let sorted = sorted(values);
        Ok(Summary {
            count: n,
            mean,
            median: quantile_sorted(&sorted, 0.5),
            std,
            min: sorted[0],
            max: sorted[n - 1],
            degenerate: n == 1,
        })
    }

    /// Picks the mean or the median.
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Mean => self.mean,
            Metric::Median => self.median,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingField {
    Batch,
    Update,
    Combined,
}

/// Per-field summaries of a run's timing records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingAggregate {
    pub batch: Summary,
    pub update: Summary,
    pub combined: Summary,
}

impl TimingAggregate {
    pub fn field(&self, field: TimingField) -> &Summary {
        match field {
            TimingField::Batch => &self.batch,
            TimingField::Update => &self.update,
            TimingField::Combined => &self.combined,
        }
    }
}

pub fn aggregate(records: &[TimingRecord]) -> Result<TimingAggregate> {
    let column = |f: fn(&TimingRecord) -> u64| -> Result<Summary> {
        Summary::of(&records.iter().map(|r| f(r) as f64).collect::<Vec<_>>())
    };
    Ok(TimingAggregate {
        batch: column(|r| r.batch_time)?,
        update: column(|r| r.update_time)?,
        combined: column(|r| r.combined_time)?,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linearly interpolated quantile of already sorted values, `q` in [0, 1].
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::DomainError(format!("quantile {q} outside [0, 1]")));
    }
    Ok(quantile_sorted(&sorted(values), q))
}

/// Distance between the first and third quartiles.
pub fn interquartile_range(values: &[f64]) -> Result<f64> {
    Ok(quantile(values, 0.75)? - quantile(values, 0.25)?)
}

/// Sample excess kurtosis `m4 / m2^2 - 3` with central moments. `None` when
/// the values have no spread.
pub fn excess_kurtosis(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let m = mean(values);
    let n = values.len() as f64;
    let m2 = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    (m2 > 0.0).then(|| m4 / (m2 * m2) - 3.0)
}

/// How many times faster `t_fast` is than `t_slow`.
pub fn speedup(t_slow: f64, t_fast: f64) -> Result<f64> {
    if t_fast == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(t_slow / t_fast)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Significance {
    /// p > 0.10
    None,
    /// 0.05 < p <= 0.10
    Moderate,
    /// p <= 0.05
    Strong,
}

impl Significance {
    pub fn from_p(p: f64) -> Self {
        if p <= 0.05 {
            Significance::Strong
        } else if p <= 0.10 {
            Significance::Moderate
        } else {
            Significance::None
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Significance::None => "none",
            Significance::Moderate => "moderate",
            Significance::Strong => "strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub significance: Significance,
    /// Both samples had zero variance. The statistic is then clamped to
    /// `±f64::MAX` (or 0) instead of being infinite.
    pub degenerate: bool,
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> Result<f64> {
    if df <= 0.0 {
        return Err(Error::DomainError(format!("degrees of freedom {df} must be positive")));
    }
    if t.is_nan() {
        return Err(Error::DomainError("t statistic is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
    let x = df / (df + t * t);
    let p = checked_beta_reg(df / 2.0, 0.5, x).map_err(|e| Error::DomainError(e.to_string()))?;
    Ok(p.clamp(0.0, 1.0))
}

/// Pooled-variance Student's t-test, two-sided.
pub fn students_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DomainError(format!(
            "t-test needs at least two values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let ss = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    let df = a.len() + b.len() - 2;
    let pooled = (ss(a, ma) + ss(b, mb)) / df as f64;
    let diff = ma - mb;

    if pooled == 0.0 {
        if diff == 0.0 {
            return Err(Error::DegenerateSamples);
        }
        return Ok(TTestResult {
            t_statistic: diff.signum() * f64::MAX,
            degrees_of_freedom: df,
            p_value: 0.0,
            significance: Significance::Strong,
            degenerate: true,
        });
    }

    let t = diff / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let p = t_two_sided_p(t, df as f64)?;
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        significance: Significance::from_p(p),
        degenerate: false,
    })
}

/// Counts per half-open bin `[origin + k * width, origin + (k + 1) * width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub origin: f64,
    pub counts: BTreeMap<i64, u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(bin_width: f64, origin: f64) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::InvalidBinWidth(bin_width));
        }
        Ok(Histogram {
            bin_width,
            origin,
            counts: BTreeMap::new(),
            total: 0,
        })
    }

    pub fn bin_index(&self, x: f64) -> i64 {
        ((x - self.origin) / self.bin_width).floor() as i64
    }

    pub fn bin_lower(&self, index: i64) -> f64 {
        self.origin + index as f64 * self.bin_width
    }

    pub fn add(&mut self, x: f64) {
        *self.counts.entry(self.bin_index(x)).or_default() += 1;
        self.total += 1;
    }

    /// Adds every bin of `other`, which must use the same binning.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.bin_width != other.bin_width || self.origin != other.origin {
            return Err(Error::InvalidConfig("histograms use different bins".into()));
        }
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_default() += c;
        }
        self.total += other.total;
        Ok(())
    }

    /// Re-bins into wider bins. Exact when every old bin lies inside one new
    /// bin, i.e. `bin_width` is a multiple of the current width and the
    /// origins are aligned.
    pub fn rebin(&self, bin_width: f64, origin: f64) -> Result<Histogram> {
        let mut out = Histogram::new(bin_width, origin)?;
        let ratio = bin_width / self.bin_width;
        let shift = (origin - self.origin) / self.bin_width;
        if ratio.fract() != 0.0 || shift.fract() != 0.0 {
            return Err(Error::InvalidBinWidth(bin_width));
        }
        for (&k, &c) in &self.counts {
            *out.counts.entry(out.bin_index(self.bin_lower(k))).or_default() += c;
        }
        out.total = self.total;
        Ok(out)
    }

    /// Sum of counts in bins whose lower edge is at or above `x`.
    pub fn mass_at_or_above(&self, x: f64) -> u64 {
        self.counts
            .iter()
            .filter(|(&k, _)| self.bin_lower(k) >= x)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Rows of `(bin_lower, count)` in ascending bin order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (self.bin_lower(k), c))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lower,count")?;
        for (lower, count) in self.rows() {
            writeln!(out, "{lower},{count}")?;
        }
        Ok(())
    }
}

pub fn histogram(values: &[f64], bin_width: f64, origin: f64) -> Result<Histogram> {
    let mut h = Histogram::new(bin_width, origin)?;
    values.iter().for_each(|&v| h.add(v));
    Ok(h)
}
