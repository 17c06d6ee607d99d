//! Candles, spreads, and the sign flip that maps S₁ = (c, h, l) to S₂ = (C, H, L).
//!
//! Prices are taken to be log-prices already; nothing here transforms them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open/high/low/close of one time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl Candle {
    pub fn new(open: f64, high: f64, low: f64, close: f64) -> Self {
        Self {
            open,
            high,
            low,
            close,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.open, self.high, self.low, self.close];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCandle(format!("non-finite price in {self:?}")));
        }
        if self.low > self.high {
            return Err(Error::InvalidCandle(format!(
                "high {} < low {}",
                self.high, self.low
            )));
        }
        for (name, v) in [("open", self.open), ("close", self.close)] {
            if v < self.low || v > self.high {
                return Err(Error::InvalidCandle(format!(
                    "{name} {v} outside [low {}, high {}]",
                    self.low, self.high
                )));
            }
        }
        Ok(())
    }

    pub fn spreads(&self) -> Result<SpreadsS1> {
        spreads_from_candle(self)
    }
}

/// `(c, h, l)` = close, high and low measured from the open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadsS1 {
    pub c: f64,
    pub h: f64,
    pub l: f64,
}

impl SpreadsS1 {
    pub fn new(c: f64, h: f64, l: f64) -> Self {
        Self { c, h, l }
    }

    /// The same window seen on the negated path: `(-c, -l, -h)`.
    pub fn mirror(self) -> Self {
        Self {
            c: -self.c,
            h: -self.l,
            l: -self.h,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            c: k * self.c,
            h: k * self.h,
            l: k * self.l,
        }
    }

    pub fn flip(self) -> SpreadsS2 {
        flip(self)
    }
}

/// `(C, H, L)`: the spreads of the path reflected so that it closes above its open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadsS2 {
    #[serde(rename = "C")]
    pub close: f64,
    #[serde(rename = "H")]
    pub high: f64,
    #[serde(rename = "L")]
    pub low: f64,
}

impl SpreadsS2 {
    pub fn new(close: f64, high: f64, low: f64) -> Self {
        Self { close, high, low }
    }

    /// Overshoot of the high beyond the close, `Δ = H - C`.
    #[inline]
    pub fn overshoot(&self) -> f64 {
        self.high - self.close
    }

    /// Depth of the low below the open, `δ = -L`.
    #[inline]
    pub fn undershoot(&self) -> f64 {
        -self.low
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            close: k * self.close,
            high: k * self.high,
            low: k * self.low,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.close >= 0.0 && self.high >= self.close && self.low <= 0.0
    }
}

/// Spreads of a candle relative to its open. Rejects candles that violate
/// `low <= {open, close} <= high`.
pub fn spreads_from_candle(candle: &Candle) -> Result<SpreadsS1> {
    candle.validate()?;
    Ok(SpreadsS1 {
        c: candle.close - candle.open,
        h: candle.high - candle.open,
        l: candle.low - candle.open,
    })
}

/// Reflect the window so that the close sits above the open.
///
/// `c = 0` takes the identity branch.
pub fn flip(s: SpreadsS1) -> SpreadsS2 {
    if s.c >= 0.0 {
        SpreadsS2 {
            close: s.c,
            high: s.h,
            low: s.l,
        }
    } else {
        // -0.0 would otherwise leak out of a zero high
        SpreadsS2 {
            close: -s.c,
            high: -s.l + 0.0,
            low: -s.h + 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spreads_examples() {
        let s = spreads_from_candle(&Candle::new(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(s, SpreadsS1::new(0.0, 0.0, 0.0));

        let s = spreads_from_candle(&Candle::new(1.0, 1.5, 0.8, 1.2)).unwrap();
        assert!((s.c - 0.2).abs() < 1e-15 && (s.h - 0.5).abs() < 1e-15 && (s.l + 0.2).abs() < 1e-15);

        let s = spreads_from_candle(&Candle::new(1.0, 1.0, 0.6, 0.7)).unwrap();
        assert!((s.c + 0.3).abs() < 1e-15 && s.h == 0.0 && (s.l + 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_candles() {
        assert!(spreads_from_candle(&Candle::new(1.0, 0.9, 1.1, 1.0)).is_err());
        assert!(spreads_from_candle(&Candle::new(1.2, 1.1, 0.9, 1.0)).is_err());
        assert!(spreads_from_candle(&Candle::new(1.0, 1.1, 0.9, 0.8)).is_err());
        assert!(spreads_from_candle(&Candle::new(f64::NAN, 1.1, 0.9, 1.0)).is_err());
    }

    #[test]
    fn flip_examples() {
        let s2 = flip(SpreadsS1::new(0.2, 0.5, -0.2));
        assert_eq!(s2, SpreadsS2::new(0.2, 0.5, -0.2));

        let s2 = flip(SpreadsS1::new(-0.3, 0.0, -0.4));
        assert_eq!(s2, SpreadsS2::new(0.3, 0.4, 0.0));
        assert!(s2.low.is_sign_positive());

        let s = SpreadsS1::new(0.0, 0.3, -0.1);
        assert_eq!(flip(s), SpreadsS2::new(0.0, 0.3, -0.1));
    }

    fn arb_spreads() -> impl Strategy<Value = SpreadsS1> {
        (-3.0f64..3.0, 0.0f64..2.0, 0.0f64..2.0).prop_map(|(c, up, down)| {
            SpreadsS1::new(c, c.max(0.0) + up, c.min(0.0) - down)
        })
    }

    proptest! {
        #[test]
        fn flip_is_mirror_invariant(s in arb_spreads()) {
            prop_assume!(s.c != 0.0);
            prop_assert_eq!(flip(s), flip(s.mirror()));
        }

        #[test]
        fn flip_is_scale_equivariant(s in arb_spreads(), k in 0.01f64..100.0) {
            let lhs = flip(s.scale(k));
            let rhs = flip(s).scale(k);
            prop_assert!((lhs.close - rhs.close).abs() <= 1e-12 * k);
            prop_assert!((lhs.high - rhs.high).abs() <= 1e-12 * k);
            prop_assert!((lhs.low - rhs.low).abs() <= 1e-12 * k);
        }

        #[test]
        fn flip_lands_in_s2(s in arb_spreads()) {
            let s2 = flip(s);
            prop_assert!(s2.is_valid());
            prop_assert!(s2.overshoot() >= 0.0 && s2.undershoot() >= 0.0);
            prop_assert!(s2.high >= 0.0);
        }
    }
}
