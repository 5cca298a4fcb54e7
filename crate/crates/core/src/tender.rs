//! Offers, tenders and the CSV files they are stored in.
//!
//! MSD files carry `zone,date,hour,unit_id,price`; MGP files additionally
//! carry `quantity,accepted`. Rows are grouped into one [`Tender`] per
//! (zone, date, hour). Malformed rows are rejected individually and reported
//! with their line number; only a missing column aborts ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Market {
    /// Balancing / dispatching-services market (unit startup offers).
    Msd,
    /// Day-ahead market.
    Mgp,
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Market::Msd => "MSD",
            Market::Mgp => "MGP",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Collusive,
    Competitive,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Collusive => "collusive",
            Label::Competitive => "competitive",
            Label::Unlabeled => "unlabeled",
        }
    }

    /// 1 for collusive, 0 otherwise.
    pub fn as_target(self) -> f64 {
        if self == Label::Collusive {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "collusive" | "1" => Ok(Label::Collusive),
            "competitive" | "0" => Ok(Label::Competitive),
            "unlabeled" | "" => Ok(Label::Unlabeled),
            other => Err(Error::Input(format!("unknown label '{other}'"))),
        }
    }
}

/// Delivery hour of a tender; `hour` runs from 1 to 24.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Timestamp {
    pub date: NaiveDate,
    pub hour: u8,
}

impl Timestamp {
    pub fn new(date: NaiveDate, hour: u8) -> Result<Self> {
        if !(1..=24).contains(&hour) {
            return Err(Error::Input(format!("hour {hour} outside 1..=24")));
        }
        Ok(Self { date, hour })
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} h{:02}", self.date, self.hour)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub unit_id: String,
    /// EUR/MWh.
    pub price: f64,
    /// MWh; MGP offers only.
    pub quantity: Option<f64>,
    /// MGP offers only.
    pub accepted: Option<bool>,
}

impl Offer {
    pub fn msd(unit_id: impl Into<String>, price: f64) -> Self {
        Self {
            unit_id: unit_id.into(),
            price,
            quantity: None,
            accepted: None,
        }
    }

    pub fn mgp(unit_id: impl Into<String>, price: f64, quantity: f64, accepted: bool) -> Self {
        Self {
            unit_id: unit_id.into(),
            price,
            quantity: Some(quantity),
            accepted: Some(accepted),
        }
    }
}

/// One hourly bidding session in one market and zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tender {
    pub id: String,
    pub market: Market,
    pub zone: String,
    pub timestamp: Timestamp,
    pub offers: Vec<Offer>,
    pub label: Label,
}

impl Tender {
    pub fn new(market: Market, zone: impl Into<String>, timestamp: Timestamp, offers: Vec<Offer>) -> Self {
        let zone = zone.into();
        Self {
            id: tender_id(&zone, timestamp),
            market,
            zone,
            timestamp,
            offers,
            label: Label::Unlabeled,
        }
    }

    pub fn prices(&self) -> Vec<f64> {
        self.offers.iter().map(|o| o.price).collect()
    }

    /// Key shared by the MSD and MGP tenders of the same hour and zone.
    pub fn slot(&self) -> (Timestamp, &str) {
        (self.timestamp, self.zone.as_str())
    }
}

pub fn tender_id(zone: &str, ts: Timestamp) -> String {
    format!("{zone}-{}-h{:02}", ts.date, ts.hour)
}

/// A rejected row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl From<RowError> for Error {
    fn from(e: RowError) -> Self {
        Error::Row {
            line: e.line,
            message: e.message,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub tenders: Vec<Tender>,
    pub rejected: Vec<RowError>,
}

const MSD_COLUMNS: [&str; 5] = ["zone", "date", "hour", "unit_id", "price"];
const MGP_COLUMNS: [&str; 7] = ["zone", "date", "hour", "unit_id", "price", "quantity", "accepted"];

fn required_columns(market: Market) -> &'static [&'static str] {
    match market {
        Market::Msd => &MSD_COLUMNS,
        Market::Mgp => &MGP_COLUMNS,
    }
}

/// Reads a tender file.
pub fn ingest(path: impl AsRef<Path>, market: Market) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(file, market, &path.display().to_string())
}

pub fn ingest_reader<R: Read>(reader: R, market: Market, source: &str) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = Vec::new();
    for col in required_columns(market) {
        match headers.iter().position(|h| h.eq_ignore_ascii_case(col)) {
            Some(i) => index.push(i),
            None => {
                return Err(Error::Schema {
                    path: source.to_string(),
                    message: format!("missing required column '{col}'"),
                })
            }
        }
    }

    let mut groups: BTreeMap<(Timestamp, String), Vec<Offer>> = BTreeMap::new();
    let mut seen: HashSet<(Timestamp, String, String)> = HashSet::new();
    let mut rejected = Vec::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(index[k]).unwrap_or("");
        match parse_row(market, &field) {
            Ok((zone, ts, offer)) => {
                if market == Market::Msd && !seen.insert((ts, zone.clone(), offer.unit_id.clone())) {
                    rejected.push(RowError {
                        line,
                        message: format!(
                            "duplicate offer from unit '{}' in tender {}",
                            offer.unit_id,
                            tender_id(&zone, ts)
                        ),
                    });
                    continue;
                }
                groups.entry((ts, zone)).or_default().push(offer);
            }
            Err(message) => rejected.push(RowError { line, message }),
        }
    }

    let tenders = groups
        .into_iter()
        .map(|((ts, zone), offers)| Tender::new(market, zone, ts, offers))
        .collect();
    Ok(Ingested { tenders, rejected })
}

fn parse_row<'a>(
    market: Market,
    field: &impl Fn(usize) -> &'a str,
) -> std::result::Result<(String, Timestamp, Offer), String> {
    let zone = field(0);
    if zone.is_empty() {
        return Err("empty zone".into());
    }
    let date = NaiveDate::parse_from_str(field(1), "%Y-%m-%d").map_err(|e| format!("bad date '{}': {e}", field(1)))?;
    let hour: u8 = field(2).parse().map_err(|_| format!("bad hour '{}'", field(2)))?;
    if !(1..=24).contains(&hour) {
        return Err(format!("hour {hour} outside 1..=24"));
    }
    let unit = field(3);
    if unit.is_empty() {
        return Err("empty unit_id".into());
    }
    let price = parse_amount(field(4), "price")?;
    let (quantity, accepted) = match market {
        Market::Msd => (None, None),
        Market::Mgp => {
            let q = parse_amount(field(5), "quantity")?;
            let a = match field(6) {
                "1" => true,
                "0" => false,
                other => return Err(format!("bad accepted flag '{other}' (expected 0 or 1)")),
            };
            (Some(q), Some(a))
        }
    };
    Ok((
        zone.to_string(),
        Timestamp { date, hour },
        Offer {
            unit_id: unit.to_string(),
            price,
            quantity,
            accepted,
        },
    ))
}

fn parse_amount(raw: &str, what: &str) -> std::result::Result<f64, String> {
    // Plain decimals only; rejects inf/nan spellings that f64::from_str accepts.
    let plain = !raw.is_empty()
        && raw
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    let value: f64 = if plain { raw.parse().ok() } else { None }.ok_or_else(|| format!("bad {what} '{raw}'"))?;
    if !value.is_finite() {
        return Err(format!("non-finite {what} '{raw}'"));
    }
    if value < 0.0 {
        return Err(format!("negative {what} {raw}"));
    }
    // Normalize -0.0 so that bitwise comparisons treat it as zero.
    Ok(if value == 0.0 { 0.0 } else { value })
}

/// Writes tenders in the file schema of their market. Rows follow tender
/// order, offers within a tender keep their order.
pub fn write_tenders<W: Write>(writer: W, market: Market, tenders: &[Tender]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(required_columns(market))?;
    for t in tenders {
        let date = t.timestamp.date.to_string();
        let hour = t.timestamp.hour.to_string();
        for o in &t.offers {
            let price = o.price.to_string();
            match market {
                Market::Msd => w.write_record([t.zone.as_str(), &date, &hour, &o.unit_id, &price])?,
                Market::Mgp => {
                    let q = o
                        .quantity
                        .ok_or_else(|| Error::Input(format!("MGP offer without quantity in {}", t.id)))?
                        .to_string();
                    let a = match o.accepted {
                        Some(true) => "1",
                        Some(false) => "0",
                        None => return Err(Error::Input(format!("MGP offer without acceptance flag in {}", t.id))),
                    };
                    w.write_record([t.zone.as_str(), &date, &hour, &o.unit_id, &price, &q, a])?
                }
            }
        }
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(())
}

pub fn write_tenders_file(path: impl AsRef<Path>, market: Market, tenders: &[Tender]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    write_tenders(std::io::BufWriter::new(file), market, tenders)
}
