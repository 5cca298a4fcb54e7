//! Hourly MGP screen series for scatter plots, as CSV and optional SVG.

use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::screens::{mgp_screens, MGP_SCREEN_NAMES};
use crate::tender::{Label, Tender, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MgpMetric {
    Offers,
    Quantity,
    AcceptedOffers,
    AcceptedQuantity,
}

impl MgpMetric {
    pub const ALL: [MgpMetric; 4] = [
        MgpMetric::Offers,
        MgpMetric::Quantity,
        MgpMetric::AcceptedOffers,
        MgpMetric::AcceptedQuantity,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// Same name as the screen column.
    pub fn as_str(self) -> &'static str {
        MGP_SCREEN_NAMES[self.index()]
    }

    fn axis_label(self) -> &'static str {
        match self {
            MgpMetric::Offers => "number of offers",
            MgpMetric::Quantity => "offered quantity (MWh)",
            MgpMetric::AcceptedOffers => "number of accepted offers",
            MgpMetric::AcceptedQuantity => "accepted quantity (MWh)",
        }
    }
}

impl fmt::Display for MgpMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MgpMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MgpMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown MGP metric '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub zone: String,
    pub timestamp: Timestamp,
    pub value: f64,
    pub label: Label,
}

/// One point per tender, in chronological order.
pub fn hourly_series(tenders: &[Tender], metric: MgpMetric) -> Result<Vec<SeriesPoint>> {
    let mut points = tenders
        .iter()
        .map(|t| {
            Ok(SeriesPoint {
                zone: t.zone.clone(),
                timestamp: t.timestamp,
                value: mgp_screens(t)?.to_array()[metric.index()],
                label: t.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| (a.timestamp, &a.zone).cmp(&(b.timestamp, &b.zone)));
    Ok(points)
}

pub fn write_series_csv<W: Write>(points: &[SeriesPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "value", "label"])?;
    for p in points {
        w.write_record([p.timestamp.to_string(), p.value.to_string(), p.label.to_string()])?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(())
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn style(label: Label) -> (&'static str, f64) {
    match label {
        Label::Collusive => ("#c62828", 2.6),
        Label::Competitive => ("#546e7a", 1.6),
        Label::Unlabeled => ("#b0bec5", 1.6),
    }
}

/// Static scatter of value against hour; axes span the data extent.
pub fn render_svg(points: &[SeriesPoint], metric: MgpMetric) -> String {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.value), hi.max(p.value))
    });
    let (lo, hi) = match (lo.is_finite(), lo < hi) {
        (false, _) => (0.0, 1.0),
        (true, false) => (lo - 0.5, hi + 0.5),
        (true, true) => (lo, hi),
    };
    let span = points.len().saturating_sub(1).max(1) as f64;
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let x = |i: usize| MARGIN + pw * i as f64 / span;
    let y = |v: f64| MARGIN + ph * (1.0 - (v - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, MARGIN + ph, MARGIN + pw, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        x0 - 6.0,
        y0,
        fmt_tick(lo)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        x0 - 6.0,
        y1 + 4.0,
        fmt_tick(hi)
    );
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        let _ = writeln!(s, r#"<text x="{x0}" y="{}">{}</text>"#, y0 + 18.0, first.timestamp);
        let _ = writeln!(
            s,
            r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#,
            y0 + 18.0,
            last.timestamp
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{} per hour</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        metric.axis_label()
    );
    // Collusive points last so they stay on top.
    for pass in [false, true] {
        for (i, p) in points.iter().enumerate() {
            if (p.label == Label::Collusive) != pass {
                continue;
            }
            let (fill, r) = style(p.label);
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}" class="{}"/>"#,
                x(i),
                y(p.value),
                p.label
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the CSV series and, if `svg` is given, the scatter plot.
pub fn export_hourly_series(
    tenders: &[Tender],
    metric: MgpMetric,
    csv_path: &Path,
    svg: Option<&Path>,
) -> Result<Vec<SeriesPoint>> {
    let points = hourly_series(tenders, metric)?;
    write_series_csv(&points, create(csv_path)?)?;
    if let Some(path) = svg {
        let mut w = create(path)?;
        w.write_all(render_svg(&points, metric).as_bytes())
            .and_then(|_| w.flush())
            .map_err(|source| Error::Write {
                path: path.to_path_buf(),
                source,
            })?;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{gen_market, MarketConfig};

    #[test]
    fn metric_names_round_trip() {
        for m in MgpMetric::ALL {
            assert_eq!(m.as_str().parse::<MgpMetric>().unwrap(), m);
        }
        assert!("offers".parse::<MgpMetric>().is_err());
    }

    #[test]
    fn svg_marks_collusive_points() {
        let cfg = MarketConfig {
            days: 2,
            collusive_windows: vec!["2021-03-01..2021-03-01".parse().unwrap()],
            ..Default::default()
        };
        let m = gen_market(&cfg).unwrap();
        let mut mgp = m.mgp.clone();
        for (t, l) in mgp.iter_mut().zip(&m.labels) {
            t.label = l.label;
        }
        let pts = hourly_series(&mgp, MgpMetric::AcceptedOffers).unwrap();
        let svg = render_svg(&pts, MgpMetric::AcceptedOffers);
        assert_eq!(svg.matches("class=\"collusive\"").count(), 24);
        assert_eq!(svg.matches("<circle").count(), 48);
        assert!(render_svg(&[], MgpMetric::Offers).ends_with("</svg>\n"));
    }

    #[test]
    fn csv_header_and_rows() {
        let cfg = MarketConfig {
            days: 1,
            hours_per_day: 2,
            ..Default::default()
        };
        let m = gen_market(&cfg).unwrap();
        let pts = hourly_series(&m.mgp, MgpMetric::Offers).unwrap();
        let mut buf = Vec::new();
        write_series_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "timestamp,value,label");
        assert!(lines[1].starts_with("2021-03-01 h01,"));
    }
}
