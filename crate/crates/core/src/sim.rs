//! Synthetic coupled MSD/MGP market with competitive, bid-rotation and
//! capacity-withholding hours.
//!
//! Every hour draws the same fixed set of random numbers from
//! `child_rng(seed, hour_index)` before any regime is applied, so a
//! collusive hour differs from its competitive counterfactual only through
//! the regime rules.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::child_rng;
use crate::spec::{CartelType, DateWindow};
use crate::tender::{write_tenders_file, Label, Market, Offer, Tender, Timestamp};

/// Collusive-hour behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Collusive windows are labeled but generated competitively.
    None,
    Rotation,
    Withholding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithholdingMode {
    /// Cartel units stay out of the MGP.
    Physical,
    /// Cartel units offer above the clearing cutoff.
    Economic,
}

mod windows_as_strings {
    use super::DateWindow;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &[DateWindow], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(w.iter().map(|w| w.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DateWindow>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(D::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub zone: String,
    pub start_date: NaiveDate,
    pub days: u32,
    pub hours_per_day: u8,
    #[serde(with = "windows_as_strings")]
    pub collusive_windows: Vec<DateWindow>,
    pub regime: Regime,
    pub withholding_mode: WithholdingMode,
    pub n_units_mgp: usize,
    /// MSD participants; they are the first units of the MGP roster.
    pub n_units_msd: usize,
    /// Cartel members; the first MSD units.
    pub cartel_size: usize,
    pub mgp_participation: f64,
    pub mgp_price_mu: f64,
    /// Spread of the persistent per-unit MGP price level.
    pub mgp_unit_sigma: f64,
    /// Hour-to-hour noise around a unit's price level.
    pub mgp_price_sigma: f64,
    /// Log shift of the cartel units' MGP price level (negative: cheap,
    /// normally accepted units).
    pub cartel_mgp_shift: f64,
    /// Clearing cutoff: exp(mgp_price_mu + cutoff_shift + cutoff_sigma * z).
    pub cutoff_shift: f64,
    pub cutoff_sigma: f64,
    pub qty_mu: f64,
    /// Spread of unit capacities (fixed per unit).
    pub qty_unit_sigma: f64,
    /// Hour-level shock common to all units.
    pub qty_hour_sigma: f64,
    pub qty_noise_sigma: f64,
    /// Demand quota as a share of mean total capacity.
    pub demand_share: f64,
    pub demand_sigma: f64,
    /// Withheld MGP offers are priced at cutoff * (1 + U(min, max)).
    pub withheld_markup_min: f64,
    pub withheld_markup_max: f64,
    pub msd_price_mu: f64,
    pub msd_price_sigma: f64,
    /// Rotation: the designated winner bids its competitive draw times this.
    pub rotation_inflation: f64,
    /// Rotation: covers bid winner * (1 + U(min, max)).
    pub cover_markup_min: f64,
    pub cover_markup_max: f64,
    /// Withholding: cartel MSD prices are multiplied by this.
    pub withholding_msd_inflation: f64,
    /// Share of collusive hours in which the cartel acts on the MSD.
    pub msd_collusion_share: f64,
    /// Share of collusive hours in which the cartel withholds on the MGP.
    pub mgp_collusion_share: f64,
    /// Capacity multiplier of the cartel units.
    pub cartel_capacity_scale: f64,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).expect("valid date");
        Self {
            zone: "SIMZ".into(),
            start_date: start,
            days: 24,
            hours_per_day: 24,
            collusive_windows: vec![DateWindow::new(start, start + Days::new(7))],
            regime: Regime::Rotation,
            withholding_mode: WithholdingMode::Economic,
            n_units_mgp: 130,
            n_units_msd: 8,
            cartel_size: 4,
            mgp_participation: 0.99,
            mgp_price_mu: 50f64.ln(),
            mgp_unit_sigma: 0.3,
            mgp_price_sigma: 0.03,
            cartel_mgp_shift: -1.0,
            cutoff_shift: 0.1,
            cutoff_sigma: 0.01,
            qty_mu: 50f64.ln(),
            qty_unit_sigma: 0.5,
            qty_hour_sigma: 0.03,
            qty_noise_sigma: 0.15,
            demand_share: 0.9,
            demand_sigma: 0.05,
            withheld_markup_min: 0.05,
            withheld_markup_max: 0.4,
            msd_price_mu: 150f64.ln(),
            msd_price_sigma: 0.25,
            rotation_inflation: 1.05,
            cover_markup_min: 0.25,
            cover_markup_max: 0.4,
            withholding_msd_inflation: 1.15,
            msd_collusion_share: 0.65,
            mgp_collusion_share: 0.65,
            cartel_capacity_scale: 2.5,
            seed: 42,
        }
    }
}

pub const CONFIG_KEYS: [&str; 35] = [
    "zone",
    "start_date",
    "days",
    "hours_per_day",
    "collusive_windows",
    "regime",
    "withholding_mode",
    "n_units_mgp",
    "n_units_msd",
    "cartel_size",
    "mgp_participation",
    "mgp_price_mu",
    "mgp_unit_sigma",
    "mgp_price_sigma",
    "cartel_mgp_shift",
    "cutoff_shift",
    "cutoff_sigma",
    "qty_mu",
    "qty_unit_sigma",
    "qty_hour_sigma",
    "qty_noise_sigma",
    "demand_share",
    "demand_sigma",
    "withheld_markup_min",
    "withheld_markup_max",
    "msd_price_mu",
    "msd_price_sigma",
    "rotation_inflation",
    "cover_markup_min",
    "cover_markup_max",
    "withholding_msd_inflation",
    "msd_collusion_share",
    "mgp_collusion_share",
    "cartel_capacity_scale",
    "seed",
];

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::None => "none",
            Regime::Rotation => "rotation",
            Regime::Withholding => "withholding",
        })
    }
}

pub fn unit_id(i: usize) -> String {
    format!("U{:03}", i + 1)
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(format!("simulator config: {m}")));
        if self.n_units_msd > self.n_units_mgp || self.n_units_msd == 0 {
            return bad(format!(
                "n_units_msd = {} must be between 1 and n_units_mgp = {}",
                self.n_units_msd, self.n_units_mgp
            ));
        }
        if self.cartel_size > self.n_units_msd {
            return bad("cartel_size exceeds n_units_msd".into());
        }
        if self.regime == Regime::Rotation && self.cartel_size < 2 {
            return bad("rotation needs at least two cartel units".into());
        }
        if !(1..=24).contains(&self.hours_per_day) {
            return bad("hours_per_day must be in 1..=24".into());
        }
        for (k, v) in [
            ("mgp_participation", self.mgp_participation),
            ("msd_collusion_share", self.msd_collusion_share),
            ("mgp_collusion_share", self.mgp_collusion_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{k} must be a probability"));
            }
        }
        let positive = [
            ("mgp_price_sigma", self.mgp_price_sigma),
            ("msd_price_sigma", self.msd_price_sigma),
            ("rotation_inflation", self.rotation_inflation),
            ("cartel_capacity_scale", self.cartel_capacity_scale),
            ("withholding_msd_inflation", self.withholding_msd_inflation),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be positive"));
            }
        }
        let non_negative = [
            ("cutoff_sigma", self.cutoff_sigma),
            ("mgp_unit_sigma", self.mgp_unit_sigma),
            ("qty_unit_sigma", self.qty_unit_sigma),
            ("qty_hour_sigma", self.qty_hour_sigma),
            ("qty_noise_sigma", self.qty_noise_sigma),
            ("demand_share", self.demand_share),
            ("demand_sigma", self.demand_sigma),
        ];
        for (k, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{k} must be non-negative"));
            }
        }
        if !(0.0 < self.withheld_markup_min && self.withheld_markup_min <= self.withheld_markup_max) {
            return bad("need 0 < withheld_markup_min <= withheld_markup_max".into());
        }
        if !(0.0 < self.cover_markup_min && self.cover_markup_min <= self.cover_markup_max) {
            return bad("need 0 < cover_markup_min <= cover_markup_max".into());
        }
        Ok(())
    }

    pub fn cartel_units(&self) -> Vec<String> {
        (0..self.cartel_size).map(unit_id).collect()
    }

    pub fn hours(&self) -> Vec<Timestamp> {
        (0..self.days)
            .flat_map(|d| {
                let date = self.start_date + Days::new(u64::from(d));
                (1..=self.hours_per_day).map(move |h| Timestamp { date, hour: h })
            })
            .collect()
    }

    pub fn is_collusive(&self, date: NaiveDate) -> bool {
        self.collusive_windows.iter().any(|w| w.contains(date))
    }

    /// Mean unit capacity exp(qty_mu + qty_unit_sigma^2 / 2) times the roster.
    fn mean_total_capacity(&self) -> f64 {
        self.n_units_mgp as f64 * (self.qty_mu + 0.5 * self.qty_unit_sigma.powi(2)).exp()
    }
}

fn cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Persistent unit characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct Units {
    pub capacity: Vec<f64>,
    /// Log MGP price level.
    pub price_level: Vec<f64>,
}

/// Draws the units once, from a stream separate from the hours.
pub fn draw_units(cfg: &MarketConfig) -> Units {
    let mut rng = child_rng(cfg.seed, u64::MAX);
    let mut capacity = Vec::with_capacity(cfg.n_units_mgp);
    let mut price_level = Vec::with_capacity(cfg.n_units_mgp);
    for i in 0..cfg.n_units_mgp {
        let zq: f64 = rng.sample(StandardNormal);
        let zp: f64 = rng.sample(StandardNormal);
        let (shift, scale) = if i < cfg.cartel_size {
            (cfg.cartel_mgp_shift, cfg.cartel_capacity_scale)
        } else {
            (0.0, 1.0)
        };
        capacity.push(scale * (cfg.qty_mu + cfg.qty_unit_sigma * zq).exp());
        price_level.push(cfg.mgp_price_mu + cfg.mgp_unit_sigma * zp + shift);
    }
    Units { capacity, price_level }
}

/// All random inputs of one hour.
#[derive(Debug, Clone)]
pub struct HourDraws {
    participate: Vec<f64>,
    mgp_price: Vec<f64>,
    qty_noise: Vec<f64>,
    withheld_markup: Vec<f64>,
    hour_shock: f64,
    cutoff: f64,
    demand: f64,
    msd_price: Vec<f64>,
    cover: Vec<f64>,
    activity: f64,
}

impl HourDraws {
    pub fn draw<R: Rng>(cfg: &MarketConfig, rng: &mut R) -> Self {
        let m = cfg.n_units_mgp;
        let normal = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
        let participate = (0..m).map(|_| rng.random::<f64>()).collect();
        let mgp_price = (0..m).map(|_| normal(rng)).collect();
        let qty_noise = (0..m).map(|_| normal(rng)).collect();
        let withheld_markup = (0..m).map(|_| rng.random::<f64>()).collect();
        let hour_shock = normal(rng);
        let cutoff = normal(rng);
        let demand = normal(rng);
        let msd_price = (0..cfg.n_units_msd).map(|_| normal(rng)).collect();
        let cover = (0..cfg.n_units_msd).map(|_| rng.random::<f64>()).collect();
        let activity = rng.random::<f64>();
        Self {
            participate,
            mgp_price,
            qty_noise,
            withheld_markup,
            hour_shock,
            cutoff,
            demand,
            msd_price,
            cover,
            activity,
        }
    }
}

/// What the cartel does in the MGP this hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MgpConduct {
    Compete,
    Absent,
    PriceAboveCutoff,
}

fn build_mgp(cfg: &MarketConfig, units: &Units, d: &HourDraws, ts: Timestamp, conduct: MgpConduct) -> Tender {
    let cartel = cfg.cartel_size;
    let cutoff = (cfg.mgp_price_mu + cfg.cutoff_shift + cfg.cutoff_sigma * d.cutoff).exp();
    let quota = cfg.demand_share * cfg.mean_total_capacity() * (cfg.demand_sigma * d.demand).exp();
    let mut offers: Vec<(usize, f64, f64)> = Vec::with_capacity(cfg.n_units_mgp);
    for i in 0..cfg.n_units_mgp {
        if d.participate[i] >= cfg.mgp_participation {
            continue;
        }
        let in_cartel = i < cartel;
        if in_cartel && conduct == MgpConduct::Absent {
            continue;
        }
        let mut price = cents((units.price_level[i] + cfg.mgp_price_sigma * d.mgp_price[i]).exp());
        if in_cartel && conduct == MgpConduct::PriceAboveCutoff {
            let u = d.withheld_markup[i];
            let markup = cfg.withheld_markup_min + u * (cfg.withheld_markup_max - cfg.withheld_markup_min);
            price = price.max(cents(cutoff * (1.0 + markup)) + 0.01);
        }
        let qty =
            cents(units.capacity[i] * (cfg.qty_hour_sigma * d.hour_shock + cfg.qty_noise_sigma * d.qty_noise[i]).exp());
        offers.push((i, price, qty.max(0.01)));
    }
    // Lowest price first (unit index breaks ties) while under the cutoff
    // and until the quota is filled.
    let mut order: Vec<usize> = (0..offers.len()).collect();
    order.sort_by(|&a, &b| offers[a].1.total_cmp(&offers[b].1).then(offers[a].0.cmp(&offers[b].0)));
    let mut accepted = vec![false; offers.len()];
    let mut filled = 0.0;
    for k in order {
        let (_, price, qty) = offers[k];
        if price > cutoff || filled >= quota {
            break;
        }
        accepted[k] = true;
        filled += qty;
    }
    let offers = offers
        .into_iter()
        .zip(accepted)
        .map(|((i, p, q), a)| Offer::mgp(unit_id(i), p, q, a))
        .collect();
    Tender::new(Market::Mgp, cfg.zone.clone(), ts, offers)
}

fn competitive_msd_prices(cfg: &MarketConfig, d: &HourDraws) -> Vec<f64> {
    d.msd_price
        .iter()
        .map(|z| cents((cfg.msd_price_mu + cfg.msd_price_sigma * z).exp()))
        .collect()
}

fn build_msd(cfg: &MarketConfig, ts: Timestamp, prices: &[f64]) -> Tender {
    let offers = prices
        .iter()
        .enumerate()
        .map(|(i, p)| Offer::msd(unit_id(i), *p))
        .collect();
    Tender::new(Market::Msd, cfg.zone.clone(), ts, offers)
}

/// Every unit bids independently.
pub fn gen_competitive_hour(cfg: &MarketConfig, units: &Units, d: &HourDraws, ts: Timestamp) -> (Tender, Tender) {
    (
        build_msd(cfg, ts, &competitive_msd_prices(cfg, d)),
        build_mgp(cfg, units, d, ts, MgpConduct::Compete),
    )
}

/// Index of the cartel unit designated to win collusive hour `rotation`.
pub fn rotation_winner(cfg: &MarketConfig, rotation: usize) -> usize {
    rotation % cfg.cartel_size
}

/// Bid rotation on the MSD with economic withholding on the MGP.
pub fn gen_rotation_hour(
    cfg: &MarketConfig,
    units: &Units,
    d: &HourDraws,
    ts: Timestamp,
    rotation: usize,
) -> (Tender, Tender) {
    (
        build_msd(cfg, ts, &rotation_msd_prices(cfg, d, rotation)),
        build_mgp(cfg, units, d, ts, MgpConduct::PriceAboveCutoff),
    )
}

fn rotation_msd_prices(cfg: &MarketConfig, d: &HourDraws, rotation: usize) -> Vec<f64> {
    let mut prices = competitive_msd_prices(cfg, d);
    let winner = rotation_winner(cfg, rotation);
    let win = cents(prices[winner] * cfg.rotation_inflation);
    prices[winner] = win;
    for j in (0..cfg.cartel_size).filter(|&j| j != winner) {
        let markup = cfg.cover_markup_min + d.cover[j] * (cfg.cover_markup_max - cfg.cover_markup_min);
        prices[j] = cents(win * (1.0 + markup)).max(win + 0.01);
    }
    prices
}

/// Capacity withholding on the MGP, inflated cartel prices on the MSD.
pub fn gen_withholding_hour(cfg: &MarketConfig, units: &Units, d: &HourDraws, ts: Timestamp) -> (Tender, Tender) {
    (
        build_msd(cfg, ts, &withholding_msd_prices(cfg, d)),
        build_mgp(cfg, units, d, ts, withholding_conduct(cfg)),
    )
}

fn withholding_msd_prices(cfg: &MarketConfig, d: &HourDraws) -> Vec<f64> {
    let mut prices = competitive_msd_prices(cfg, d);
    for p in prices.iter_mut().take(cfg.cartel_size) {
        *p = cents(*p * cfg.withholding_msd_inflation);
    }
    prices
}

fn withholding_conduct(cfg: &MarketConfig) -> MgpConduct {
    match cfg.withholding_mode {
        WithholdingMode::Physical => MgpConduct::Absent,
        WithholdingMode::Economic => MgpConduct::PriceAboveCutoff,
    }
}

/// Ground truth for one generated hour.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub zone: String,
    pub timestamp: Timestamp,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedMarket {
    pub msd: Vec<Tender>,
    pub mgp: Vec<Tender>,
    pub labels: Vec<LabelRow>,
}

/// Generates every hour of the configured horizon in chronological order.
pub fn gen_market(cfg: &MarketConfig) -> Result<SimulatedMarket> {
    cfg.validate()?;
    let units = draw_units(cfg);
    let mut out = SimulatedMarket {
        msd: Vec::new(),
        mgp: Vec::new(),
        labels: Vec::new(),
    };
    let mut rotation = 0;
    for (h, ts) in cfg.hours().into_iter().enumerate() {
        let draws = HourDraws::draw(cfg, &mut child_rng(cfg.seed, h as u64));
        let collusive = cfg.is_collusive(ts.date);
        // Within a window the cartel acts on each market in a share of hours,
        // from opposite ends of one draw: a hour without MSD conduct is the
        // likeliest to carry MGP conduct.
        let on_msd = collusive && draws.activity < cfg.msd_collusion_share;
        let on_mgp = collusive && draws.activity >= 1.0 - cfg.mgp_collusion_share;
        let prices = match (on_msd, cfg.regime) {
            (true, Regime::Rotation) => {
                rotation += 1;
                rotation_msd_prices(cfg, &draws, rotation - 1)
            }
            (true, Regime::Withholding) => withholding_msd_prices(cfg, &draws),
            _ => competitive_msd_prices(cfg, &draws),
        };
        let conduct = match (on_mgp, cfg.regime) {
            (true, Regime::Rotation) => MgpConduct::PriceAboveCutoff,
            (true, Regime::Withholding) => withholding_conduct(cfg),
            _ => MgpConduct::Compete,
        };
        let (msd, mgp) = (build_msd(cfg, ts, &prices), build_mgp(cfg, &units, &draws, ts, conduct));
        out.labels.push(LabelRow {
            zone: cfg.zone.clone(),
            timestamp: ts,
            label: if collusive {
                Label::Collusive
            } else {
                Label::Competitive
            },
        });
        out.msd.push(msd);
        out.mgp.push(mgp);
    }
    Ok(out)
}

/// Dataset spec text matching a simulated market.
pub fn spec_toml(cfg: &MarketConfig, cartel: CartelType) -> String {
    let quote = |v: &[String]| v.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ");
    let windows: Vec<String> = cfg.collusive_windows.iter().map(|w| w.to_string()).collect();
    let units = if cartel == CartelType::Complete {
        format!("cartel_units = [{}]\n", quote(&cfg.cartel_units()))
    } else {
        String::new()
    };
    format!(
        "name = \"sim_{}\"\ncase = \"custom\"\ncartel_type = \"{cartel}\"\nwindows = [{}]\nzones = [\"{}\"]\n{units}seed = {}\n",
        if cartel == CartelType::Complete { "restricted" } else { "full" },
        quote(&windows),
        cfg.zone,
        cfg.seed
    )
}

pub fn write_labels<W: Write>(labels: &[LabelRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["zone", "date", "hour", "label"])?;
    for l in labels {
        w.write_record([
            l.zone.clone(),
            l.timestamp.date.to_string(),
            l.timestamp.hour.to_string(),
            l.label.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}

/// Paths written by [`write_market`].
#[derive(Debug, Clone)]
pub struct SimulationFiles {
    pub msd: PathBuf,
    pub mgp: PathBuf,
    pub labels: PathBuf,
    pub spec_complete: PathBuf,
    pub spec_incomplete: PathBuf,
}

/// Writes `msd.csv`, `mgp.csv`, `labels.csv` and one dataset spec per cartel
/// type into `dir`.
pub fn write_market(cfg: &MarketConfig, market: &SimulatedMarket, dir: &Path) -> Result<SimulationFiles> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Write { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let files = SimulationFiles {
        msd: dir.join("msd.csv"),
        mgp: dir.join("mgp.csv"),
        labels: dir.join("labels.csv"),
        spec_complete: dir.join("spec_complete.toml"),
        spec_incomplete: dir.join("spec_incomplete.toml"),
    };
    write_tenders_file(&files.msd, Market::Msd, &market.msd)?;
    write_tenders_file(&files.mgp, Market::Mgp, &market.mgp)?;
    let f = std::fs::File::create(&files.labels).map_err(io(&files.labels))?;
    write_labels(&market.labels, std::io::BufWriter::new(f))?;
    std::fs::write(&files.spec_complete, spec_toml(cfg, CartelType::Complete)).map_err(io(&files.spec_complete))?;
    std::fs::write(&files.spec_incomplete, spec_toml(cfg, CartelType::Incomplete))
        .map_err(io(&files.spec_incomplete))?;
    Ok(files)
}
