//! Dataset specifications and collusion labeling.
//!
//! A spec is read from a flat TOML file:
//!
//! ```toml
//! case = "brindisi2016"            # campania2010 | brindisi2016 | combined | custom
//! cartel_type = "complete"         # complete | incomplete
//! windows = ["2016-04-21..2016-06-15"]
//! day_filter = "all"               # all | sundays_holidays
//! holidays = ["2016-06-02"]
//! cartel_units = ["U001", "U002", "U003", "U004"]
//! zones = ["BRNN"]
//! seed = 42
//! ```
//!
//! The two named cases pre-fill `windows`, `zones` and `day_filter`; explicit
//! keys override them. A `combined` spec lists the spec files it pools with
//! `combine = ["campania.toml", "brindisi.toml"]` (paths relative to the
//! combined file).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tender::{Label, Tender};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Campania2010,
    Brindisi2016,
    Combined,
    Custom,
}

impl Case {
    pub fn as_str(self) -> &'static str {
        match self {
            Case::Campania2010 => "campania2010",
            Case::Brindisi2016 => "brindisi2016",
            Case::Combined => "combined",
            Case::Custom => "custom",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartelType {
    /// Every MSD participant colludes; MSD offers are restricted to the
    /// cartel units.
    Complete,
    /// Only a subset colludes; all zone participants are kept.
    Incomplete,
}

impl CartelType {
    pub fn as_str(self) -> &'static str {
        match self {
            CartelType::Complete => "complete",
            CartelType::Incomplete => "incomplete",
        }
    }
}

impl fmt::Display for CartelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayFilter {
    #[default]
    All,
    /// Collusive only on Sundays and listed holidays.
    SundaysHolidays,
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

impl FromStr for DateWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| Error::Spec(format!("window '{s}' is not START..END")))?;
        let parse = |x: &str| {
            NaiveDate::parse_from_str(x.trim(), "%Y-%m-%d")
                .map_err(|e| Error::Spec(format!("bad date '{x}' in window '{s}': {e}")))
        };
        Ok(Self::new(parse(a)?, parse(b)?))
    }
}

impl fmt::Display for DateWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Label used in reports; defaults to `<case>_<restricted|full>`.
    pub name: Option<String>,
    pub case: Case,
    pub cartel_type: CartelType,
    pub windows: Vec<DateWindow>,
    pub day_filter: DayFilter,
    pub holidays: Vec<NaiveDate>,
    pub cartel_units: Vec<String>,
    /// Empty means every zone.
    pub zones: Vec<String>,
    pub seed: u64,
    /// Pooled sub-specs of a `combined` case.
    pub components: Vec<DatasetSpec>,
}

impl DatasetSpec {
    pub fn custom(cartel_type: CartelType, windows: Vec<DateWindow>, cartel_units: Vec<String>, seed: u64) -> Self {
        Self {
            name: None,
            case: Case::Custom,
            cartel_type,
            windows,
            day_filter: DayFilter::All,
            holidays: Vec::new(),
            cartel_units,
            zones: Vec::new(),
            seed,
            components: Vec::new(),
        }
    }

    /// Brindisi 2016: systematic withholding from April 21st until the
    /// investigation opened on June 15th, zone BRNN.
    pub fn brindisi_2016(cartel_type: CartelType, cartel_units: Vec<String>, seed: u64) -> Self {
        let mut s = Self::custom(cartel_type, vec![brindisi_window()], cartel_units, seed);
        s.case = Case::Brindisi2016;
        s.zones = vec!["BRNN".into()];
        s
    }

    /// Campania 2010: May to October, Sundays and public holidays only,
    /// zone CSUD.
    pub fn campania_2010(
        cartel_type: CartelType,
        cartel_units: Vec<String>,
        holidays: Vec<NaiveDate>,
        seed: u64,
    ) -> Self {
        let mut s = Self::custom(cartel_type, vec![campania_window()], cartel_units, seed);
        s.case = Case::Campania2010;
        s.zones = vec!["CSUD".into()];
        s.day_filter = DayFilter::SundaysHolidays;
        s.holidays = holidays;
        s
    }

    pub fn combined(cartel_type: CartelType, components: Vec<DatasetSpec>, seed: u64) -> Self {
        let mut s = Self::custom(cartel_type, Vec::new(), Vec::new(), seed);
        s.case = Case::Combined;
        s.components = components;
        s
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let kind = match self.cartel_type {
                CartelType::Complete => "restricted",
                CartelType::Incomplete => "full",
            };
            format!("{}_{kind}", self.case)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.case == Case::Combined {
            if self.components.is_empty() {
                return Err(Error::Spec("combined case lists no component specs".into()));
            }
            for c in &self.components {
                if c.case == Case::Combined {
                    return Err(Error::Spec("combined specs cannot be nested".into()));
                }
                if c.cartel_type != self.cartel_type {
                    return Err(Error::Spec(format!(
                        "component {} has cartel_type {}, combined spec has {}",
                        c.display_name(),
                        c.cartel_type,
                        self.cartel_type
                    )));
                }
                c.validate()?;
            }
            return Ok(());
        }
        if self.windows.is_empty() {
            return Err(Error::Spec("no collusive window given".into()));
        }
        for w in &self.windows {
            if w.start > w.end {
                return Err(Error::Spec(format!("window {w} ends before it starts")));
            }
        }
        let mut sorted = self.windows.clone();
        sorted.sort_by_key(|w| w.start);
        for pair in sorted.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::Spec(format!("windows {} and {} overlap", pair[0], pair[1])));
            }
        }
        if self.cartel_type == CartelType::Complete && self.cartel_units.is_empty() {
            return Err(Error::Spec("complete cartel spec needs cartel_units".into()));
        }
        Ok(())
    }

    fn collusive_day(&self, d: NaiveDate) -> bool {
        match self.day_filter {
            DayFilter::All => true,
            DayFilter::SundaysHolidays => d.weekday() == Weekday::Sun || self.holidays.contains(&d),
        }
    }

    fn in_zone(&self, zone: &str) -> bool {
        self.zones.is_empty() || self.zones.iter().any(|z| z == zone)
    }

    /// Label of a single tender date under this (non-combined) spec.
    pub fn label_for(&self, d: NaiveDate) -> Label {
        if self.windows.iter().any(|w| w.contains(d)) {
            if self.collusive_day(d) {
                Label::Collusive
            } else {
                Label::Unlabeled
            }
        } else if self.windows.iter().all(|w| d > w.end) {
            Label::Competitive
        } else {
            Label::Unlabeled
        }
    }

    /// Loads a spec from a TOML file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
        Self::from_table(table, path.parent())
    }

    /// Builds a spec from already-parsed keys; `base` resolves `combine` paths.
    pub fn from_table(table: toml::Table, base: Option<&Path>) -> Result<Self> {
        let raw: RawSpec = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Spec(e.message().to_string()))?;
        raw.resolve(base)
    }
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

pub fn brindisi_window() -> DateWindow {
    DateWindow::new(date(2016, 4, 21), date(2016, 6, 15))
}

pub fn campania_window() -> DateWindow {
    DateWindow::new(date(2010, 5, 1), date(2010, 10, 31))
}

/// Keys accepted in a dataset spec file.
pub const SPEC_KEYS: [&str; 10] = [
    "name",
    "case",
    "cartel_type",
    "windows",
    "day_filter",
    "holidays",
    "cartel_units",
    "zones",
    "seed",
    "combine",
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: Option<String>,
    case: Option<Case>,
    cartel_type: CartelType,
    windows: Option<Vec<String>>,
    day_filter: Option<DayFilter>,
    #[serde(default)]
    holidays: Vec<String>,
    #[serde(default)]
    cartel_units: Vec<String>,
    zones: Option<Vec<String>>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    combine: Vec<String>,
}

impl RawSpec {
    fn resolve(self, base: Option<&Path>) -> Result<DatasetSpec> {
        let case = self.case.unwrap_or(Case::Custom);
        let holidays = self
            .holidays
            .iter()
            .map(|h| {
                NaiveDate::parse_from_str(h, "%Y-%m-%d").map_err(|e| Error::Spec(format!("bad holiday '{h}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut spec = match case {
            Case::Brindisi2016 => DatasetSpec::brindisi_2016(self.cartel_type, self.cartel_units, self.seed),
            Case::Campania2010 => {
                DatasetSpec::campania_2010(self.cartel_type, self.cartel_units, holidays.clone(), self.seed)
            }
            Case::Custom => DatasetSpec::custom(self.cartel_type, Vec::new(), self.cartel_units, self.seed),
            Case::Combined => {
                let components = self
                    .combine
                    .iter()
                    .map(|p| {
                        let p = base.map(|b| b.join(p)).unwrap_or_else(|| p.into());
                        DatasetSpec::from_file(p)
                    })
                    .collect::<Result<Vec<_>>>()?;
                DatasetSpec::combined(self.cartel_type, components, self.seed)
            }
        };
        if case != Case::Combined && !self.combine.is_empty() {
            return Err(Error::Spec("'combine' is only valid with case = \"combined\"".into()));
        }
        spec.name = self.name;
        spec.holidays = holidays;
        if let Some(w) = self.windows {
            spec.windows = w.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if let Some(z) = self.zones {
            spec.zones = z;
        }
        if let Some(f) = self.day_filter {
            spec.day_filter = f;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Labels tenders by date. Tenders outside the spec's zones are dropped;
/// tenders before or between windows come back `Unlabeled`.
pub fn apply_labels(tenders: &[Tender], spec: &DatasetSpec) -> Result<Vec<Tender>> {
    spec.validate()?;
    if spec.case == Case::Combined {
        return Err(Error::Spec("label each component of a combined spec separately".into()));
    }
    Ok(tenders
        .iter()
        .filter(|t| spec.in_zone(&t.zone))
        .map(|t| {
            let mut t = t.clone();
            t.label = spec.label_for(t.timestamp.date);
            t
        })
        .collect())
}
