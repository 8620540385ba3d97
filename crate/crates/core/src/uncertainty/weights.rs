//! Multiplicative (anti-resonance) and inverse-multiplicative (resonance)
//! uncertainty weights for a single mode.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::coeff::{CoefKind, ModeDelta, ModePairStats};
use crate::error::{Error, Result};
use crate::lti::{poly, RationalTF};

/// `W_m1 = W_i1 = [1 1]`; the column weights carry the coefficient
/// statistics. Entries are `None` when the corresponding radius is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredWeightSet {
    pub w_m1: [f64; 2],
    /// `[n1 entry, n2 entry]`.
    pub w_m2: [Option<RationalTF>; 2],
    pub w_i1: [f64; 2],
    /// `[d1 entry, d2 entry]`.
    pub w_i2: [Option<RationalTF>; 2],
}

impl StructuredWeightSet {
    pub fn weight(&self, kind: CoefKind) -> Option<&RationalTF> {
        match kind {
            CoefKind::N1 => self.w_m2[0].as_ref(),
            CoefKind::N2 => self.w_m2[1].as_ref(),
            CoefKind::D1 => self.w_i2[0].as_ref(),
            CoefKind::D2 => self.w_i2[1].as_ref(),
        }
    }

    /// Channels with a nonzero radius, in `CoefKind` order.
    pub fn active_channels(&self) -> Vec<CoefKind> {
        CoefKind::ALL
            .into_iter()
            .filter(|&k| self.weight(k).is_some())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.active_channels().is_empty()
    }
}

pub fn structured_weights(stats: &ModePairStats) -> StructuredWeightSet {
    let entry = |mean_c1: f64, mean_c2: f64, scale: f64, power: usize, radius: f64| {
        if radius == 0.0 {
            return None;
        }
        let mut num = vec![0.0; power + 1];
        num[power] = scale * radius;
        Some(RationalTF::new(num, vec![1.0, mean_c1, mean_c2]).expect("positive means"))
    };
    let w_m2 = match &stats.numerator {
        Some((n2, n1)) => [
            entry(n1.mean, n2.mean, n1.mean, 1, n1.radius),
            entry(n1.mean, n2.mean, n2.mean, 2, n2.radius),
        ],
        None => [None, None],
    };
    let (d1, d2) = (&stats.d1, &stats.d2);
    let w_i2 = [
        entry(d1.mean, d2.mean, -d1.mean, 1, d1.radius),
        entry(d1.mean, d2.mean, -d2.mean, 2, d2.radius),
    ];
    StructuredWeightSet {
        w_m1: [1.0, 1.0],
        w_m2,
        w_i1: [1.0, 1.0],
        w_i2,
    }
}

/// `g·(1 − W_i1 Δ_i W_i2)⁻¹·(1 + W_m1 Δ_m W_m2)` assembled as a rational
/// function from the weights. Weight denominators shared with the nominal
/// numerator or denominator cancel exactly, so the result has the degree of
/// the mode itself.
pub fn lft_mode_tf(
    stats: &ModePairStats,
    weights: &StructuredWeightSet,
    delta: &ModeDelta,
) -> Result<RationalTF> {
    delta.check()?;
    let nominal = stats.nominal_tf();
    let inv_terms: Vec<RationalTF> = [CoefKind::D1, CoefKind::D2]
        .into_iter()
        .enumerate()
        .filter_map(|(i, kind)| {
            weights.w_i2[i]
                .as_ref()
                .map(|w| w.scaled(-weights.w_i1[i] * delta.get(kind)))
        })
        .collect();
    let mult_terms: Vec<RationalTF> = [CoefKind::N1, CoefKind::N2]
        .into_iter()
        .enumerate()
        .filter_map(|(i, kind)| {
            weights.w_m2[i]
                .as_ref()
                .map(|w| w.scaled(weights.w_m1[i] * delta.get(kind)))
        })
        .collect();
    let (inv_num, inv_den) = one_plus_sum(&inv_terms)?;
    let (mult_num, mult_den) = one_plus_sum(&mult_terms)?;

    // g·(inv_den/inv_num)·(mult_num/mult_den)
    let mut num = vec![nominal.num().to_vec(), inv_den, mult_num];
    let mut den = vec![nominal.den().to_vec(), inv_num, mult_den];
    cancel_common(&mut num, &mut den);
    let product = |fs: &[Vec<f64>]| fs.iter().fold(vec![1.0], |acc, f| poly::mul(&acc, f));
    RationalTF::new(product(&num), product(&den))
}

/// `1 + Σ terms` as `(numerator, denominator)`, keeping a shared denominator
/// when every term uses the same one.
fn one_plus_sum(terms: &[RationalTF]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = terms.first() else {
        return Ok((vec![1.0], vec![1.0]));
    };
    if terms.iter().all(|t| t.den() == first.den()) {
        let num = terms
            .iter()
            .fold(first.den().to_vec(), |acc, t| poly::add(&acc, t.num()));
        return Ok((num, first.den().to_vec()));
    }
    let mut acc = RationalTF::one();
    for t in terms {
        acc = acc.parallel(t)?;
    }
    Ok((acc.num().to_vec(), acc.den().to_vec()))
}

/// Removes factors that appear verbatim in both lists.
fn cancel_common(num: &mut Vec<Vec<f64>>, den: &mut Vec<Vec<f64>>) {
    let mut i = 0;
    while i < num.len() {
        if let Some(j) = den.iter().position(|d| *d == num[i]) {
            num.swap_remove(i);
            den.swap_remove(j);
        } else {
            i += 1;
        }
    }
}

/// Frequency-domain pieces of one mode at a single frequency.
#[derive(Debug, Clone)]
pub(crate) struct ModeResponse {
    pub nominal: Complex64,
    /// `(kind, weight response)` for each active channel.
    pub channels: Vec<(CoefKind, Complex64)>,
}

impl ModeResponse {
    pub fn at(
        stats: &ModePairStats,
        weights: &StructuredWeightSet,
        active: &[CoefKind],
        omega: f64,
    ) -> Result<Self> {
        let nominal = stats.nominal_tf().eval(omega)?;
        let channels = active
            .iter()
            .map(|&k| {
                let w = weights
                    .weight(k)
                    .ok_or_else(|| Error::InvalidParameter(format!("channel {} inactive", k.label())))?;
                Ok((k, w.eval(omega)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nominal, channels })
    }

    /// Response of the perturbed mode; `deltas` is aligned with `channels`.
    pub fn perturbed(&self, deltas: &[f64], omega: f64) -> Result<Complex64> {
        let mut inv = Complex64::new(1.0, 0.0);
        let mut mult = Complex64::new(1.0, 0.0);
        for ((kind, w), &d) in self.channels.iter().zip(deltas) {
            if kind.is_numerator() {
                mult += w * d;
            } else {
                inv -= w * d;
            }
        }
        if inv.norm() < 1e-300 {
            return Err(Error::SingularPerturbation { omega });
        }
        Ok(self.nominal * mult / inv)
    }
}
