//! Incidence and climate ingestion.
//!
//! Input files are CSV with the header
//! `period,incidence,rainfall_mm,humidity_pct,temperature_c`. A period is
//! either a calendar month (`2005-01`) or an ISO week (`2005-W01`); the
//! resolution is taken from the first data row and must not change.
//!
//! Weekly series are reduced to months by assigning each ISO week to the
//! month containing its Thursday.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::InputPoint;

pub const HEADER: [&str; 5] = [
    "period",
    "incidence",
    "rainfall_mm",
    "humidity_pct",
    "temperature_c",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("value out of range at line {line}: {message}")]
    Range { line: usize, message: String },
    #[error("line {line}: period `{period}` does not match the file resolution")]
    MixedResolution { line: usize, period: String },
    #[error("duplicate period {0}")]
    DuplicatePeriod(String),
    #[error("no weeks contribute to month {0}")]
    Gap(Month),
    #[error("expected weekly records, found {0}")]
    NotWeekly(String),
    #[error("expected monthly records, found {0}")]
    NotMonthly(String),
    #[error("monthly records are not contiguous: {prev} is followed by {next}")]
    NotContiguous { prev: Month, next: Month },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("train_end {train_end} is outside the data range {first}..={last}")]
    TrainEndOutOfRange {
        train_end: Month,
        first: Month,
        last: Month,
    },
    #[error("no records")]
    Empty,
}

// ---------------------------------------------------------------------------
// Periods.

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Month {
    year: i32,
    month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    /// Months since year 0, January.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: ord.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn next(&self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    /// Signed number of months from `origin` to `self`.
    pub fn months_since(&self, origin: &Month) -> i64 {
        self.ordinal() - origin.ordinal()
    }

    pub fn of_date(d: NaiveDate) -> Self {
        Self {
            year: d.year(),
            month: d.month(),
        }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("invalid month `{s}`, expected YYYY-MM");
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        Month::new(year, month).ok_or_else(bad)
    }
}

impl TryFrom<String> for Month {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Month> for String {
    fn from(m: Month) -> String {
        m.to_string()
    }
}

/// An ISO-8601 week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IsoWeek {
    year: i32,
    week: u32,
}

impl IsoWeek {
    pub fn new(year: i32, week: u32) -> Option<Self> {
        NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).map(|_| Self { year, week })
    }

    pub fn monday(&self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Mon).expect("validated week")
    }

    pub fn thursday(&self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Thu).expect("validated week")
    }

    /// The month this week is counted in.
    pub fn assigned_month(&self) -> Month {
        Month::of_date(self.thursday())
    }

    /// Days of this week that fall inside its assigned month (4 to 7).
    pub fn days_in_assigned_month(&self) -> u32 {
        let m = self.assigned_month();
        self.monday()
            .iter_days()
            .take(7)
            .filter(|d| Month::of_date(*d) == m)
            .count() as u32
    }
}

impl fmt::Display for IsoWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-W{:02}", self.year, self.week)
    }
}

impl FromStr for IsoWeek {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("invalid ISO week `{s}`, expected YYYY-Www");
        let (y, w) = s.trim().split_once("-W").ok_or_else(bad)?;
        if y.len() != 4 || w.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let week = w.parse().map_err(|_| bad())?;
        IsoWeek::new(year, week).ok_or_else(bad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    Month(Month),
    Week(IsoWeek),
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Month(m) => m.fmt(f),
            Period::Week(w) => w.fmt(f),
        }
    }
}

impl FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.contains("-W") {
            s.parse().map(Period::Week)
        } else {
            s.parse().map(Period::Month)
        }
    }
}

impl Period {
    fn is_week(&self) -> bool {
        matches!(self, Period::Week(_))
    }
}

// ---------------------------------------------------------------------------
// Records.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub period: Period,
    pub incidence: u64,
    pub rainfall: f64,
    pub humidity: f64,
    pub temperature: f64,
}

impl RawRecord {
    pub fn monthly(month: Month, incidence: u64, rainfall: f64, humidity: f64, temperature: f64) -> Self {
        Self {
            period: Period::Month(month),
            incidence,
            rainfall,
            humidity,
            temperature,
        }
    }

    pub fn month(&self) -> Option<Month> {
        match self.period {
            Period::Month(m) => Some(m),
            Period::Week(_) => None,
        }
    }

    pub fn covariates(&self) -> Covariates {
        Covariates {
            rainfall: self.rainfall,
            humidity: self.humidity,
            temperature: self.temperature,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<RawRecord>, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<RawRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
    }

    let mut out = Vec::new();
    let mut weekly = None;
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| DataError::Parse {
            line,
            message: e.to_string(),
        })?;
        let cell = |k: usize| -> Result<&str, DataError> {
            match row.get(idx[k]) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(DataError::Parse {
                    line,
                    message: format!("missing value in column `{}`", HEADER[k]),
                }),
            }
        };
        let number = |k: usize| -> Result<f64, DataError> {
            let raw = cell(k)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::Parse {
                    line,
                    message: format!("`{raw}` is not a finite number in column `{}`", HEADER[k]),
                })
        };

        let period_str = cell(0)?;
        let period: Period = period_str
            .parse()
            .map_err(|message| DataError::Parse { line, message })?;
        match weekly {
            None => weekly = Some(period.is_week()),
            Some(w) if w != period.is_week() => {
                return Err(DataError::MixedResolution {
                    line,
                    period: period_str.to_string(),
                })
            }
            _ => {}
        }

        let inc_raw = cell(1)?;
        let incidence = match inc_raw.parse::<i64>() {
            Ok(v) if v < 0 => {
                return Err(DataError::Range {
                    line,
                    message: format!("negative incidence {v}"),
                })
            }
            Ok(v) => v as u64,
            Err(_) => {
                return Err(DataError::Parse {
                    line,
                    message: format!("`{inc_raw}` is not an integer incidence count"),
                })
            }
        };
        let rainfall = number(2)?;
        if rainfall < 0.0 {
            return Err(DataError::Range {
                line,
                message: format!("negative rainfall {rainfall}"),
            });
        }
        let humidity = number(3)?;
        if !(0.0..=100.0).contains(&humidity) {
            return Err(DataError::Range {
                line,
                message: format!("humidity {humidity} outside [0, 100]"),
            });
        }
        let temperature = number(4)?;
        out.push(RawRecord {
            period,
            incidence,
            rainfall,
            humidity,
            temperature,
        });
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[RawRecord], writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| DataError::Io(std::io::Error::other(e));
    w.write_record(HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.period.to_string(),
            r.incidence.to_string(),
            r.rainfall.to_string(),
            r.humidity.to_string(),
            r.temperature.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the records as a monthly series, aggregating if they are weekly.
pub fn to_monthly(records: Vec<RawRecord>) -> Result<Vec<RawRecord>, DataError> {
    match records.first() {
        Some(r) if r.period.is_week() => aggregate_monthly(&records),
        _ => Ok(records),
    }
}

#[derive(Default)]
struct MonthAcc {
    incidence: u64,
    rainfall: f64,
    humidity: f64,
    temperature: f64,
    days: u32,
}

/// Sums incidence and rainfall per month; humidity and temperature are
/// averaged with each week weighted by its days inside the month.
pub fn aggregate_monthly(records: &[RawRecord]) -> Result<Vec<RawRecord>, DataError> {
    let mut seen = std::collections::HashSet::new();
    let mut months: BTreeMap<Month, MonthAcc> = BTreeMap::new();
    for r in records {
        let Period::Week(w) = r.period else {
            return Err(DataError::NotWeekly(r.period.to_string()));
        };
        if !seen.insert(w) {
            return Err(DataError::DuplicatePeriod(w.to_string()));
        }
        let days = w.days_in_assigned_month();
        let acc = months.entry(w.assigned_month()).or_default();
        acc.incidence += r.incidence;
        acc.rainfall += r.rainfall;
        acc.humidity += days as f64 * r.humidity;
        acc.temperature += days as f64 * r.temperature;
        acc.days += days;
    }
    let (Some(first), Some(last)) = (months.keys().next().copied(), months.keys().last().copied())
    else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(months.len());
    let mut m = first;
    while m <= last {
        let acc = months.get(&m).ok_or(DataError::Gap(m))?;
        let w = acc.days as f64;
        out.push(RawRecord::monthly(
            m,
            acc.incidence,
            acc.rainfall,
            acc.humidity / w,
            acc.temperature / w,
        ));
        m = m.next();
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Datasets.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub rainfall: f64,
    pub humidity: f64,
    pub temperature: f64,
}

impl Covariates {
    pub fn to_array(&self) -> [f64; 3] {
        [self.rainfall, self.humidity, self.temperature]
    }
}

/// Per-covariate mean and (population) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl CovariateStats {
    /// Constant columns get a unit scale so they standardize to zero.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a Covariates>) -> Self {
        let rows: Vec<[f64; 3]> = rows.into_iter().map(Covariates::to_array).collect();
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for c in 0..3 {
            mean[c] = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n;
            std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { mean, std }
    }

    pub fn standardize(&self, t: f64, c: &Covariates) -> InputPoint {
        let z = |k: usize, v: f64| (v - self.mean[k]) / self.std[k];
        InputPoint::new(t, z(0, c.rainfall), z(1, c.humidity), z(2, c.temperature))
    }
}

/// A time-ordered monthly series ready for modeling.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// The month at `t = 1`.
    pub origin: Month,
    pub periods: Vec<Month>,
    pub points: Vec<InputPoint>,
    pub counts: Vec<u64>,
    pub raw: Vec<Covariates>,
    pub covariate_stats: CovariateStats,
}

impl Dataset {
    fn assemble(origin: Month, records: &[RawRecord], stats: CovariateStats) -> Self {
        let periods: Vec<Month> = records.iter().filter_map(RawRecord::month).collect();
        let raw: Vec<Covariates> = records.iter().map(RawRecord::covariates).collect();
        let points = periods
            .iter()
            .zip(&raw)
            .map(|(m, c)| stats.standardize(time_index(origin, *m), c))
            .collect();
        Self {
            origin,
            periods,
            points,
            counts: records.iter().map(|r| r.incidence).collect(),
            raw,
            covariate_stats: stats,
        }
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Rows at `indices`, keeping their time index and this dataset's stats.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            origin: self.origin,
            periods: indices.iter().map(|&i| self.periods[i]).collect(),
            points: indices.iter().map(|&i| self.points[i]).collect(),
            counts: indices.iter().map(|&i| self.counts[i]).collect(),
            raw: indices.iter().map(|&i| self.raw[i]).collect(),
            covariate_stats: self.covariate_stats,
        }
    }

    /// Re-standardizes every row with `stats`.
    pub fn restandardize(&self, stats: CovariateStats) -> Dataset {
        let points = self
            .points
            .iter()
            .zip(&self.raw)
            .map(|(p, c)| stats.standardize(p.t, c))
            .collect();
        Dataset {
            points,
            covariate_stats: stats,
            ..self.clone()
        }
    }

    pub fn to_records(&self) -> Vec<RawRecord> {
        self.periods
            .iter()
            .zip(&self.counts)
            .zip(&self.raw)
            .map(|((m, &n), c)| RawRecord::monthly(*m, n, c.rainfall, c.humidity, c.temperature))
            .collect()
    }
}

/// Running month index with `origin` at 1.
pub fn time_index(origin: Month, m: Month) -> f64 {
    (m.months_since(&origin) + 1) as f64
}

fn check_monthly(monthly: &[RawRecord]) -> Result<(Month, Month), DataError> {
    let mut prev: Option<Month> = None;
    for r in monthly {
        let m = r
            .month()
            .ok_or_else(|| DataError::NotMonthly(r.period.to_string()))?;
        if let Some(p) = prev {
            if m != p.next() {
                return Err(if m == p {
                    DataError::DuplicatePeriod(m.to_string())
                } else {
                    DataError::NotContiguous { prev: p, next: m }
                });
            }
        }
        prev = Some(m);
    }
    let first = monthly.first().and_then(RawRecord::month).ok_or(DataError::Empty)?;
    Ok((first, prev.expect("nonempty")))
}

/// Splits a contiguous monthly series at `train_end` (inclusive). Covariate
/// statistics come from the training rows and are applied to both sides.
pub fn build_dataset(monthly: &[RawRecord], train_end: Month) -> Result<(Dataset, Dataset), DataError> {
    let (first, _) = check_monthly(monthly)?;
    let cut = monthly
        .iter()
        .take_while(|r| r.month().is_some_and(|m| m <= train_end))
        .count();
    if cut == 0 {
        return Err(DataError::EmptySplit("train"));
    }
    if cut == monthly.len() {
        return Err(DataError::EmptySplit("test"));
    }
    let stats = CovariateStats::fit(monthly[..cut].iter().map(|r| r.covariates()).collect::<Vec<_>>().iter());
    Ok((
        Dataset::assemble(first, &monthly[..cut], stats),
        Dataset::assemble(first, &monthly[cut..], stats),
    ))
}

/// Training rows only, for fitting a model that forecasts beyond the data.
/// `train_end` must lie within the series.
pub fn build_training_set(monthly: &[RawRecord], train_end: Month) -> Result<Dataset, DataError> {
    let (first, last) = check_monthly(monthly)?;
    if train_end < first || train_end > last {
        return Err(DataError::TrainEndOutOfRange {
            train_end,
            first,
            last,
        });
    }
    let cut = monthly
        .iter()
        .take_while(|r| r.month().is_some_and(|m| m <= train_end))
        .count();
    let rows: Vec<Covariates> = monthly[..cut].iter().map(|r| r.covariates()).collect();
    Ok(Dataset::assemble(first, &monthly[..cut], CovariateStats::fit(&rows)))
}

/// The whole series as one dataset, standardized on all of its rows.
pub fn build_full(monthly: &[RawRecord]) -> Result<Dataset, DataError> {
    let (first, _) = check_monthly(monthly)?;
    let rows: Vec<Covariates> = monthly.iter().map(|r| r.covariates()).collect();
    Ok(Dataset::assemble(first, monthly, CovariateStats::fit(&rows)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "period,incidence,rainfall_mm,humidity_pct,temperature_c\n";

    #[test]
    fn parses_documented_row() {
        let recs = read_csv(format!("{HEAD}2005-01,436,198.6,84.3,26.5\n").as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].incidence, 436);
        assert_eq!(recs[0].period, Period::Month(Month::new(2005, 1).unwrap()));
        assert_eq!(recs[0].rainfall, 198.6);
    }

    #[test]
    fn empty_body() {
        assert!(read_csv(HEAD.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn negative_incidence() {
        let err = read_csv(format!("{HEAD}2005-01,1,1,80,27\n2005-02,-3,1,80,27\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Range { line: 3, .. }), "{err}");
    }

    #[test]
    fn humidity_range() {
        let err = read_csv(format!("{HEAD}2005-01,1,1,101,27\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Range { line: 2, .. }));
    }

    #[test]
    fn missing_column() {
        let err = read_csv("period,incidence,rainfall_mm,temperature_c\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(ref c) if c == "humidity_pct"));
    }

    #[test]
    fn missing_cell_and_garbage() {
        let err = read_csv(format!("{HEAD}2005-01,1,,80,27\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
        let err = read_csv(format!("{HEAD}2005-13,1,1,80,27\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
        let err = read_csv(format!("{HEAD}2005-01,1.5,1,80,27\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
    }

    #[test]
    fn mixed_resolution() {
        let err = read_csv(format!("{HEAD}2005-W01,1,1,80,27\n2005-02,1,1,80,27\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::MixedResolution { line: 3, .. }));
    }

    #[test]
    fn month_arithmetic() {
        let m: Month = "2016-12".parse().unwrap();
        assert_eq!(m.next().to_string(), "2017-01");
        assert_eq!(Month::from_ordinal(m.ordinal()), m);
        assert_eq!(m.next().months_since(&"2005-01".parse().unwrap()), 144);
        assert!("2016-1".parse::<Month>().is_err());
    }

    #[test]
    fn iso_week_assignment() {
        // 2015-W01 runs Mon 2014-12-29 .. Sun 2015-01-04; Thursday is Jan 1.
        let w: IsoWeek = "2015-W01".parse().unwrap();
        assert_eq!(w.assigned_month().to_string(), "2015-01");
        assert_eq!(w.days_in_assigned_month(), 4);
        // 2015-W53 exists (Dec 28 2015 .. Jan 3 2016), Thursday Dec 31.
        let w: IsoWeek = "2015-W53".parse().unwrap();
        assert_eq!(w.assigned_month().to_string(), "2015-12");
        assert!("2014-W53".parse::<IsoWeek>().is_err());
    }

    fn week(y: i32, w: u32, inc: u64, rain: f64, hum: f64, temp: f64) -> RawRecord {
        RawRecord {
            period: Period::Week(IsoWeek::new(y, w).unwrap()),
            incidence: inc,
            rainfall: rain,
            humidity: hum,
            temperature: temp,
        }
    }

    #[test]
    fn four_inner_weeks_sum() {
        // 2015-W02..W05 are Jan 5 .. Feb 1, all inside January.
        let recs: Vec<_> = (2..=5)
            .zip([10, 20, 30, 40])
            .map(|(w, n)| week(2015, w, n, 1.0, 80.0, 27.0))
            .collect();
        let m = aggregate_monthly(&recs).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].incidence, 100);
        assert_eq!(m[0].rainfall, 4.0);
    }

    #[test]
    fn gap_detected() {
        // January weeks then a March week: February has no contributions.
        let recs = vec![week(2015, 2, 1, 1.0, 80.0, 27.0), week(2015, 11, 1, 1.0, 80.0, 27.0)];
        assert!(matches!(aggregate_monthly(&recs), Err(DataError::Gap(m)) if m.to_string() == "2015-02"));
    }

    fn monthly(n: usize) -> Vec<RawRecord> {
        let mut m = Month::new(2005, 1).unwrap();
        (0..n)
            .map(|i| {
                let r = RawRecord::monthly(m, 10 + i as u64, 100.0 + i as f64, 70.0 + (i % 5) as f64, 27.0 + 0.1 * i as f64);
                m = m.next();
                r
            })
            .collect()
    }

    #[test]
    fn split_bookkeeping() {
        let recs = monthly(24);
        let (train, test) = build_dataset(&recs, Month::new(2005, 12).unwrap()).unwrap();
        assert_eq!(train.len(), 12);
        let ts: Vec<f64> = test.points.iter().map(|p| p.t).collect();
        assert_eq!(ts, (13..=24).map(|t| t as f64).collect::<Vec<_>>());
        for c in 0..3 {
            let col: Vec<f64> = train
                .points
                .iter()
                .map(|p| [p.rainfall, p.humidity, p.temperature][c])
                .collect();
            let mean = col.iter().sum::<f64>() / 12.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 12.0;
            assert!(mean.abs() < 1e-10 && (var.sqrt() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn split_errors() {
        let recs = monthly(6);
        assert!(matches!(
            build_dataset(&recs, Month::new(2004, 12).unwrap()),
            Err(DataError::EmptySplit("train"))
        ));
        assert!(matches!(
            build_dataset(&recs, Month::new(2005, 6).unwrap()),
            Err(DataError::EmptySplit("test"))
        ));
        assert!(matches!(
            build_training_set(&recs, Month::new(2006, 1).unwrap()),
            Err(DataError::TrainEndOutOfRange { .. })
        ));
        let mut gap = recs.clone();
        gap.remove(2);
        assert!(matches!(
            build_dataset(&gap, Month::new(2005, 2).unwrap()),
            Err(DataError::NotContiguous { .. })
        ));
    }

    #[test]
    fn constant_covariate_column() {
        let rows = [
            Covariates { rainfall: 1.0, humidity: 80.0, temperature: 27.0 },
            Covariates { rainfall: 3.0, humidity: 80.0, temperature: 27.0 },
        ];
        let s = CovariateStats::fit(&rows);
        assert_eq!(s.std[1], 1.0);
        assert_eq!(s.standardize(1.0, &rows[0]).humidity, 0.0);
    }
}
