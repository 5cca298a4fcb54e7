//! Screen vectors for datasets and the `screens` CSV.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Record};
use crate::error::{Error, Result};
use crate::screens::{
    classical_screens, mgp_screens, subgroup_column_names, subgroup_summary_with_cap, ScreenValue, CLASSICAL_NAMES,
    DEFAULT_SUBGROUP_CAP, MGP_SCREEN_NAMES,
};
use crate::spec::CartelType;
use crate::tender::{Label, Tender};

/// Which screens feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenBlock {
    MsdClassical,
    MsdSubgroup,
    MgpNew,
    /// The MSD block matching the cartel type plus the MGP block.
    Combined,
}

impl ScreenBlock {
    pub const ALL: [ScreenBlock; 4] = [
        ScreenBlock::MsdClassical,
        ScreenBlock::MsdSubgroup,
        ScreenBlock::MgpNew,
        ScreenBlock::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScreenBlock::MsdClassical => "msd_classical",
            ScreenBlock::MsdSubgroup => "msd_subgroup",
            ScreenBlock::MgpNew => "mgp_new",
            ScreenBlock::Combined => "combined",
        }
    }

    /// The three blocks reported for a cartel type: MSD-only, MGP-only,
    /// combined.
    pub fn for_cartel_type(cartel: CartelType) -> [ScreenBlock; 3] {
        [msd_block(cartel), ScreenBlock::MgpNew, ScreenBlock::Combined]
    }

    /// Column names of this block.
    pub fn columns(self, cartel: CartelType) -> Result<Vec<String>> {
        let classical = || CLASSICAL_NAMES.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mgp = || MGP_SCREEN_NAMES.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let msd = |c: CartelType| match c {
            CartelType::Complete => classical(),
            CartelType::Incomplete => subgroup_column_names(),
        };
        match (self, cartel) {
            (ScreenBlock::MsdClassical, CartelType::Complete) | (ScreenBlock::MsdSubgroup, CartelType::Incomplete) => {
                Ok(msd(cartel))
            }
            (ScreenBlock::MgpNew, _) => Ok(mgp()),
            (ScreenBlock::Combined, c) => {
                let mut cols = msd(c);
                cols.extend(mgp());
                Ok(cols)
            }
            (b, c) => Err(Error::Input(format!(
                "screen block {b} does not apply to {c} cartels (use {})",
                msd_block(c)
            ))),
        }
    }
}

fn msd_block(cartel: CartelType) -> ScreenBlock {
    match cartel {
        CartelType::Complete => ScreenBlock::MsdClassical,
        CartelType::Incomplete => ScreenBlock::MsdSubgroup,
    }
}

impl fmt::Display for ScreenBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScreenBlock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScreenBlock::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown screen block '{s}'")))
    }
}

/// Named screen columns for a set of tenders.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub names: Vec<String>,
    pub rows: Vec<Vec<ScreenValue>>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<ScreenValue>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable> {
        let idx = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::SchemaMismatch(format!("column '{n}' not in feature table")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            names: names.to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
        })
    }

    pub fn block(&self, block: ScreenBlock, cartel: CartelType) -> Result<FeatureTable> {
        self.select(&block.columns(cartel)?)
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            names: self.names.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.as_target()).collect()
    }

    /// CSV with `tender_id,label` followed by the screen columns; undefined
    /// values are empty fields.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["tender_id".to_string(), "label".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut rec = vec![id.clone(), label.to_string()];
            rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Internal(e.to_string()))?;
        Ok(())
    }
}

/// Which column groups to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureOptions {
    pub classical: bool,
    pub subgroups: bool,
    pub mgp: bool,
    pub subgroup_cap: u64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            classical: true,
            subgroups: false,
            mgp: true,
            subgroup_cap: DEFAULT_SUBGROUP_CAP,
        }
    }
}

impl FeatureOptions {
    /// Everything a cartel type's blocks need.
    pub fn for_cartel_type(cartel: CartelType) -> Self {
        Self {
            classical: true,
            subgroups: cartel == CartelType::Incomplete,
            ..Self::default()
        }
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.classical {
            names.extend(CLASSICAL_NAMES.iter().map(|s| s.to_string()));
        }
        if self.subgroups {
            names.extend(subgroup_column_names());
        }
        if self.mgp {
            names.extend(MGP_SCREEN_NAMES.iter().map(|s| s.to_string()));
        }
        names
    }
}

/// Screen vector of one MSD/MGP pair.
pub fn pair_features(msd: &Tender, mgp: &Tender, opts: &FeatureOptions) -> Result<Vec<ScreenValue>> {
    let prices = msd.prices();
    let mut row = Vec::new();
    if opts.classical {
        row.extend(classical_screens(&prices).to_array());
    }
    if opts.subgroups {
        row.extend(subgroup_summary_with_cap(&prices, opts.subgroup_cap)?.values);
    }
    if opts.mgp {
        row.extend(mgp_screens(mgp)?.to_array().map(Some));
    }
    Ok(row)
}

pub fn record_features(record: &Record, opts: &FeatureOptions) -> Result<Vec<ScreenValue>> {
    pair_features(&record.msd, &record.mgp, opts)
}

pub fn compute_features(dataset: &LabeledDataset, opts: &FeatureOptions) -> Result<FeatureTable> {
    let rows = dataset
        .records
        .iter()
        .map(|r| record_features(r, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable {
        ids: dataset.records.iter().map(|r| r.msd.id.clone()).collect(),
        labels: dataset.labels(),
        names: opts.names(),
        rows,
    })
}
