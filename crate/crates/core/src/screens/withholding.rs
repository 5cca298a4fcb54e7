use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tender::{Market, Tender};

pub const MGP_SCREEN_NAMES: [&str; 4] = [
    "mgp_offers",
    "mgp_quantity",
    "mgp_accepted_offers",
    "mgp_accepted_quantity",
];

/// Capacity-withholding screens of a zone-wide day-ahead tender.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WithholdingScreens {
    pub n_offers: usize,
    /// MWh.
    pub total_qty: f64,
    pub n_accepted: usize,
    /// MWh.
    pub accepted_qty: f64,
}

impl WithholdingScreens {
    pub fn to_array(&self) -> [f64; 4] {
        [
            self.n_offers as f64,
            self.total_qty,
            self.n_accepted as f64,
            self.accepted_qty,
        ]
    }
}

/// Sum that does not depend on the order of the terms.
fn stable_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    // Neumaier compensated summation.
    let (mut sum, mut c) = (0.0_f64, 0.0_f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn mgp_screens(tender: &Tender) -> Result<WithholdingScreens> {
    if tender.market != Market::Mgp {
        return Err(Error::Input(format!("{} is not an MGP tender", tender.id)));
    }
    let mut all = Vec::with_capacity(tender.offers.len());
    let mut accepted = Vec::new();
    for o in &tender.offers {
        let (Some(q), Some(a)) = (o.quantity, o.accepted) else {
            return Err(Error::Input(format!(
                "offer of unit '{}' in {} lacks quantity or acceptance flag",
                o.unit_id, tender.id
            )));
        };
        all.push(q);
        if a {
            accepted.push(q);
        }
    }
    Ok(WithholdingScreens {
        n_offers: all.len(),
        n_accepted: accepted.len(),
        total_qty: stable_sum(all),
        accepted_qty: stable_sum(accepted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tender::{Offer, Timestamp};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn mgp(offers: Vec<Offer>) -> Tender {
        let ts = Timestamp::new(NaiveDate::from_ymd_opt(2010, 6, 6).unwrap(), 1).unwrap();
        Tender::new(Market::Mgp, "CSUD", ts, offers)
    }

    #[test]
    fn direct_sums() {
        let t = mgp(vec![
            Offer::mgp("a", 1.0, 10.0, true),
            Offer::mgp("b", 2.0, 20.0, false),
            Offer::mgp("c", 3.0, 5.0, true),
        ]);
        let s = mgp_screens(&t).unwrap();
        assert_eq!(
            (s.n_offers, s.total_qty, s.n_accepted, s.accepted_qty),
            (3, 35.0, 2, 15.0)
        );
    }

    #[test]
    fn empty_and_invalid() {
        assert_eq!(mgp_screens(&mgp(vec![])).unwrap(), WithholdingScreens::default());
        assert!(mgp_screens(&mgp(vec![Offer::msd("a", 1.0)])).is_err());
        let mut t = mgp(vec![]);
        t.market = Market::Msd;
        assert!(mgp_screens(&t).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_order_free(qs in proptest::collection::vec((0.0f64..500.0, any::<bool>()), 0..40), k in 0usize..5) {
            let offers: Vec<Offer> = qs.iter().enumerate().map(|(i, (q, a))| Offer::mgp(format!("u{i}"), 1.0, *q, *a)).collect();
            let base = mgp_screens(&mgp(offers.clone())).unwrap();
            prop_assert!(base.n_accepted <= base.n_offers);
            prop_assert!(base.accepted_qty <= base.total_qty);

            let mut rev = offers.clone();
            rev.reverse();
            prop_assert_eq!(mgp_screens(&mgp(rev)).unwrap(), base);

            let k = k.min(offers.len());
            let removed = mgp_screens(&mgp(offers[k..].to_vec())).unwrap();
            prop_assert_eq!(removed.n_offers, base.n_offers - k);
            prop_assert!(removed.total_qty <= base.total_qty);

            if let Some(i) = offers.iter().position(|o| o.accepted == Some(false)) {
                let mut flipped = offers.clone();
                flipped[i].accepted = Some(true);
                let f = mgp_screens(&mgp(flipped)).unwrap();
                prop_assert_eq!(f.n_accepted, base.n_accepted + 1);
                let q = offers[i].quantity.unwrap();
                prop_assert!((f.accepted_qty - (base.accepted_qty + q)).abs() <= 1e-9 * (1.0 + f.accepted_qty));
            }
        }
    }
}
