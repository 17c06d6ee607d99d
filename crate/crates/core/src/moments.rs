//! Closed-form second and fourth moments of `(C, H, L)` for a standard
//! Brownian window, and the exact covariance matrix of the four basic
//! estimators built from them.
//!
//! Moments are addressed by [`MomentKey`], whose string names are stable:
//! `C`, `H`, `L` are the flipped spreads, `D` is the overshoot `Δ = H - C`
//! and `d` the undershoot `δ = -L`. Sums the literature only gives jointly
//! keep their joint key (`E[H^3L]+E[HL^3]`); `E[CH^2L]` is backed out of its
//! sum using the closed form of `E[CHL^2]`.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::special::{hl_normalizer, ZETA3};
use crate::types::SpreadsS2;

macro_rules! moment_keys {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum MomentKey { $($variant),+ }

        impl MomentKey {
            pub const ALL: &'static [MomentKey] = &[$(MomentKey::$variant),+];

            pub fn name(&self) -> &'static str {
                match self { $(MomentKey::$variant => $name),+ }
            }
        }
    };
}

moment_keys! {
    C2 => "E[C^2]",
    H2 => "E[H^2]",
    L2 => "E[L^2]",
    CH => "E[CH]",
    CL => "E[CL]",
    HL => "E[HL]",
    C4 => "E[C^4]",
    H4 => "E[H^4]",
    L4 => "E[L^4]",
    CH3 => "E[CH^3]",
    CL3 => "E[CL^3]",
    C3H => "E[C^3H]",
    C3L => "E[C^3L]",
    C2H2 => "E[C^2H^2]",
    C2L2 => "E[C^2L^2]",
    H2L2 => "E[H^2L^2]",
    C2HL => "E[C^2HL]",
    H3LPlusHL3 => "E[H^3L]+E[HL^3]",
    CH2LPlusCHL2 => "E[CH^2L]+E[CHL^2]",
    CHL2 => "E[CHL^2]",
    CH2L => "E[CH^2L]",
    Delta4Under => "E[d^4]",
    CUnder3 => "E[Cd^3]",
    C2Under2 => "E[C^2d^2]",
    C3Under => "E[C^3d]",
    C2OverUnder => "E[C^2Dd]",
    COverUnder2 => "E[CDd^2]",
    Over2Under2 => "E[D^2d^2]",
    Over3Under => "E[D^3d]",
}

impl MomentKey {
    /// Keys populated by [`closed_form_moments`]; the rest come from [`delta_moments`].
    pub fn is_base(&self) -> bool {
        *self < MomentKey::Delta4Under
    }

    /// The monomial whose expectation this key names, evaluated on one window.
    pub fn sample_value(&self, s: &SpreadsS2) -> f64 {
        let (c, h, l) = (s.close, s.high, s.low);
        let (over, under) = (s.overshoot(), s.undershoot());
        match self {
            MomentKey::C2 => c * c,
            MomentKey::H2 => h * h,
            MomentKey::L2 => l * l,
            MomentKey::CH => c * h,
            MomentKey::CL => c * l,
            MomentKey::HL => h * l,
            MomentKey::C4 => c.powi(4),
            MomentKey::H4 => h.powi(4),
            MomentKey::L4 => l.powi(4),
            MomentKey::CH3 => c * h.powi(3),
            MomentKey::CL3 => c * l.powi(3),
            MomentKey::C3H => c.powi(3) * h,
            MomentKey::C3L => c.powi(3) * l,
            MomentKey::C2H2 => c * c * h * h,
            MomentKey::C2L2 => c * c * l * l,
            MomentKey::H2L2 => h * h * l * l,
            MomentKey::C2HL => c * c * h * l,
            MomentKey::H3LPlusHL3 => h * l * (h * h + l * l),
            MomentKey::CH2LPlusCHL2 => c * h * l * (h + l),
            MomentKey::CHL2 => c * h * l * l,
            MomentKey::CH2L => c * h * h * l,
            MomentKey::Delta4Under => under.powi(4),
            MomentKey::CUnder3 => c * under.powi(3),
            MomentKey::C2Under2 => c * c * under * under,
            MomentKey::C3Under => c.powi(3) * under,
            MomentKey::C2OverUnder => c * c * over * under,
            MomentKey::COverUnder2 => c * over * under * under,
            MomentKey::Over2Under2 => over * over * under * under,
            MomentKey::Over3Under => over.powi(3) * under,
        }
    }
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MomentKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MomentKey::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown moment `{s}`")))
    }
}

impl Serialize for MomentKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct MomentTable(BTreeMap<MomentKey, f64>);

impl MomentTable {
    pub fn get(&self, key: MomentKey) -> Option<f64> {
        self.0.get(&key).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<f64> {
        self.get(name.parse().ok()?)
    }

    pub fn iter(&self) -> impl Iterator<Item = (MomentKey, f64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn at(&self, key: MomentKey) -> f64 {
        self.0[&key]
    }
}

/// `ζ(3)/16 - 2 log 2 + 47/32`, the one fourth moment not implied by the
/// classical Garman–Klass moment set.
pub fn chl2_moment() -> f64 {
    ZETA3 / 16.0 - 2.0 * LN_2 + 47.0 / 32.0
}

/// Every base moment at σ = 1, from its closed form.
pub fn closed_form_moments() -> MomentTable {
    use MomentKey::*;
    let z = ZETA3;
    let ln2 = LN_2;
    let chl_sum = 4.5 - 4.0 * ln2 - 1.75 * z;
    let table = [
        (C2, 1.0),
        (H2, 7.0 / 4.0),
        (L2, 1.0 / 4.0),
        (CH, 5.0 / 4.0),
        (CL, -1.0 / 4.0),
        (HL, 1.0 - 2.0 * ln2),
        (C4, 3.0),
        (H4, 93.0 / 16.0),
        (L4, 3.0 / 16.0),
        (CH3, 147.0 / 32.0),
        (CL3, -3.0 / 32.0),
        (C3H, 27.0 / 8.0),
        (C3L, -3.0 / 8.0),
        (C2H2, 31.0 / 8.0),
        (C2L2, 1.0 / 8.0),
        (H2L2, 3.0 - 4.0 * ln2),
        (C2HL, 2.0 - 2.0 * ln2 - 7.0 / 8.0 * z),
        (H3LPlusHL3, 6.0 - 6.0 * ln2 - 9.0 / 4.0 * z),
        (CH2LPlusCHL2, chl_sum),
        (CHL2, chl2_moment()),
        (CH2L, chl_sum - chl2_moment()),
    ];
    MomentTable(table.into_iter().collect())
}

/// Add the `(δ, Δ)` moments, each obtained as a linear combination of base
/// moments. The table must contain every base key.
pub fn delta_moments(table: &MomentTable) -> MomentTable {
    use MomentKey::*;
    let m = |k| table.at(k);
    let mut out = table.clone();
    let two_over3_under = -m(H3LPlusHL3) + m(C3L) + m(CL3) - 3.0 * m(C2HL) + 3.0 * m(CH2L);
    let derived = [
        (Delta4Under, m(L4)),
        (CUnder3, -m(CL3)),
        (C2Under2, m(C2L2)),
        (C3Under, -m(C3L)),
        (C2OverUnder, m(C3L) - m(C2HL)),
        (COverUnder2, m(CHL2) - m(C2L2)),
        (Over2Under2, m(H2L2) + m(C2L2) - 2.0 * m(CHL2)),
        // Δ and δ are exchangeable given C, so E[Δ³δ] = E[Δδ³].
        (Over3Under, two_over3_under / 2.0),
    ];
    out.0.extend(derived);
    out
}

/// Independent closed forms for the `(δ, Δ)` moments that have one.
pub fn delta_closed_forms() -> Vec<(MomentKey, f64)> {
    use MomentKey::*;
    let z = ZETA3;
    let ln2 = LN_2;
    vec![
        (Delta4Under, 3.0 / 16.0),
        (CUnder3, 3.0 / 32.0),
        (C2Under2, 1.0 / 8.0),
        (C3Under, 3.0 / 8.0),
        (C2OverUnder, 2.0 * ln2 + 7.0 / 8.0 * z - 19.0 / 8.0),
        (COverUnder2, z / 16.0 - 2.0 * ln2 + 43.0 / 32.0),
        (Over2Under2, 3.0 / 16.0 - z / 8.0),
        (Over3Under, (6.0 * ln2 - 9.0 / 16.0 * z - 27.0 / 8.0) / 2.0),
    ]
}

/// The full table: base moments plus the `(δ, Δ)` block.
pub fn full_moment_table() -> MomentTable {
    delta_moments(&closed_form_moments())
}

/// Symmetric 4×4 covariance matrix of the basic estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceMatrix4(pub [[f64; 4]; 4]);

impl CovarianceMatrix4 {
    pub fn from_upper(upper: [[f64; 4]; 4]) -> Self {
        let mut m = upper;
        for i in 0..4 {
            for j in 0..i {
                m[i][j] = m[j][i];
            }
        }
        Self(m)
    }

    pub fn diagonal(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.0[i][i])
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..4).all(|i| (0..4).all(|j| (self.0[i][j] - self.0[j][i]).abs() <= tol))
    }

    /// Determinants of the leading 1×1 … 4×4 blocks.
    pub fn leading_minors(&self) -> [f64; 4] {
        std::array::from_fn(|k| determinant(&self.0, k + 1))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.leading_minors().iter().all(|&d| d > 0.0)
    }

    /// `wᵀ Σ w`
    pub fn quadratic_form(&self, w: &[f64; 4]) -> f64 {
        (0..4)
            .map(|i| (0..4).map(|j| w[i] * self.0[i][j] * w[j]).sum::<f64>())
            .sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.iter().map(|r| r.to_vec()).collect()
    }
}

fn determinant(m: &[[f64; 4]; 4], n: usize) -> f64 {
    // Gaussian elimination with partial pivoting on the leading n×n block
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m[i][..n].to_vec()).collect();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    det
}

/// Σ assembled from the moment table.
pub fn covariance_matrix() -> CovarianceMatrix4 {
    covariance_from_moments(&full_moment_table())
}

/// Σ from any table that carries the `(δ, Δ)` block and `E[C^4]`.
pub fn covariance_from_moments(t: &MomentTable) -> CovarianceMatrix4 {
    use MomentKey::*;
    let m = |k| t.at(k);
    let d = hl_normalizer();
    let mut s = [[0.0; 4]; 4];
    s[0][0] = 8.0 * (m(Delta4Under) + m(Over2Under2)) - 1.0;
    s[1][1] = m(C4) - 1.0;
    s[2][2] = 8.0 * (m(C2Under2) + m(C2OverUnder)) - 1.0;
    s[3][3] = m(Over2Under2) / (d * d) - 1.0;
    s[0][1] = 4.0 * m(C2Under2) - 1.0;
    s[0][2] = 8.0 * m(CUnder3) + 8.0 * m(COverUnder2) - 1.0;
    s[0][3] = 4.0 * m(Over3Under) / d - 1.0;
    s[1][2] = 4.0 * m(C3Under) - 1.0;
    s[1][3] = m(C2OverUnder) / d - 1.0;
    // E[CΔ²δ] = E[CΔδ²] by exchangeability
    s[2][3] = 4.0 * m(COverUnder2) / d - 1.0;
    CovarianceMatrix4::from_upper(s)
}

/// Σ written directly in terms of log 2 and ζ(3).
pub fn covariance_matrix_closed_form() -> CovarianceMatrix4 {
    let z = ZETA3;
    let ln2 = LN_2;
    let d = 4f64.ln() - 1.25;
    let mut s = [[0.0; 4]; 4];
    s[0][0] = 2.0 - z;
    s[1][1] = 2.0;
    s[2][2] = 8.0 * (4f64.ln() + 7.0 / 8.0 * z - 9.0 / 4.0) - 1.0;
    s[3][3] = (3.0 / 16.0 - z / 8.0) / (d * d) - 1.0;
    s[0][1] = -0.5;
    s[0][2] = (21.0 + z) / 2.0 - 16.0 * ln2;
    s[0][3] = (12.0 * ln2 - 27.0 / 4.0 - 9.0 / 8.0 * z) / d - 1.0;
    s[1][2] = 0.5;
    s[1][3] = (7.0 / 8.0 * z - 9.0 / 8.0) / d;
    s[2][3] = (z / 4.0 + 43.0 / 8.0 - 8.0 * ln2) / d - 1.0;
    CovarianceMatrix4::from_upper(s)
}

/// Correlation between the Exp(1) variables `2H(H - C)` and `2L(L - C)`.
pub fn seshadri_correlation() -> f64 {
    1.0 + 3.5 * ZETA3 - 8.0 * LN_2
}

/// The same correlation from the moment table: both variables have unit
/// variance, so it is `4 E[H(H-C)L(L-C)] - 1`.
pub fn seshadri_correlation_from_moments(t: &MomentTable) -> f64 {
    use MomentKey::*;
    let cross = t.at(H2L2) - t.at(CH2LPlusCHL2) + t.at(C2HL);
    4.0 * cross - 1.0
}
