use std::io::Write;

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::tender::Label;

use super::{ks_two_sample, mann_whitney};

/// One line of the screen significance table. `None` prints as `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub screen: String,
    pub dataset: String,
    pub stat_mw: Option<f64>,
    pub p_mw: Option<f64>,
    pub stat_ks: Option<f64>,
    pub p_ks: Option<f64>,
}

/// Mann-Whitney and KS tests of collusive against competitive values for
/// every feature column. Undefined cells are skipped per column; a column
/// with no defined value in one class gets an all-NA row.
pub fn screen_significance_report(features: &FeatureTable, dataset: &str) -> Result<Vec<SignificanceRow>> {
    let mut rows = Vec::with_capacity(features.names.len());
    for (j, name) in features.names.iter().enumerate() {
        let mut collusive = Vec::new();
        let mut competitive = Vec::new();
        for (row, label) in features.rows.iter().zip(&features.labels) {
            let Some(v) = row[j] else { continue };
            match label {
                Label::Collusive => collusive.push(v),
                Label::Competitive => competitive.push(v),
                Label::Unlabeled => {}
            }
        }
        let mut out = SignificanceRow {
            screen: name.clone(),
            dataset: dataset.to_string(),
            stat_mw: None,
            p_mw: None,
            stat_ks: None,
            p_ks: None,
        };
        if !collusive.is_empty() && !competitive.is_empty() {
            let mw = mann_whitney(&collusive, &competitive)?;
            let ks = ks_two_sample(&collusive, &competitive)?;
            out.stat_mw = Some(mw.statistic);
            out.p_mw = mw.p_value;
            out.stat_ks = Some(ks.statistic);
            out.p_ks = ks.p_value;
        }
        rows.push(out);
    }
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

/// CSV with columns `screen,dataset,stat_MW,p_MW,stat_KS,p_KS`.
pub fn write_significance_csv<W: Write>(writer: W, rows: &[SignificanceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["screen", "dataset", "stat_MW", "p_MW", "stat_KS", "p_KS"])?;
    for r in rows {
        w.write_record([
            r.screen.clone(),
            r.dataset.clone(),
            cell(r.stat_mw),
            cell(r.p_mw),
            cell(r.stat_ks),
            cell(r.p_ks),
        ])?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: Vec<(&str, Vec<Option<f64>>)>, labels: Vec<Label>) -> FeatureTable {
        let n = labels.len();
        FeatureTable {
            ids: (0..n).map(|i| i.to_string()).collect(),
            labels,
            names: cols.iter().map(|(n, _)| n.to_string()).collect(),
            rows: (0..n).map(|i| cols.iter().map(|(_, c)| c[i]).collect()).collect(),
        }
    }

    #[test]
    fn constant_column_has_na_mw_p() {
        let labels: Vec<Label> = (0..40)
            .map(|i| {
                if i % 2 == 0 {
                    Label::Collusive
                } else {
                    Label::Competitive
                }
            })
            .collect();
        let constant = vec![Some(4.0); 40];
        let shifted: Vec<Option<f64>> = (0..40)
            .map(|i| Some(if i % 2 == 0 { 10.0 + i as f64 } else { i as f64 * 0.1 }))
            .collect();
        let same: Vec<Option<f64>> = (0..40).map(|i| Some((i / 2) as f64)).collect();
        let t = table(vec![("n_bids", constant), ("diff", shifted), ("same", same)], labels);
        let rows = screen_significance_report(&t, "toy").unwrap();
        assert_eq!(rows[0].p_mw, None);
        assert_eq!(rows[0].stat_ks, Some(0.0));
        assert_eq!(rows[0].p_ks, Some(1.0));
        assert!(rows[1].p_mw.unwrap() < 0.01);
        assert!(rows[2].p_mw.unwrap() > 0.95);

        let mut buf = Vec::new();
        write_significance_csv(&mut buf, &rows[..1]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "screen,dataset,stat_MW,p_MW,stat_KS,p_KS\nn_bids,toy,200,NA,0,1\n"
        );
    }

    #[test]
    fn missing_class_gives_na_row() {
        let t = table(
            vec![("rd", vec![Some(1.0), None])],
            vec![Label::Collusive, Label::Competitive],
        );
        let rows = screen_significance_report(&t, "x").unwrap();
        assert_eq!(rows[0].stat_mw, None);
        assert_eq!(rows[0].p_ks, None);
    }
}
