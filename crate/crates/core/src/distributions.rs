//! Exact arithmetic over finite, non-negative discrete random variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total probability mass of a distribution.
pub const MASS_TOL: f64 = 1e-12;
/// General comparison tolerance for derived probabilities and expectations.
pub const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// A finite distribution over non-negative reals.
///
/// Atoms are kept sorted by strictly increasing value, every probability is in
/// `(0, 1]` and the total mass is one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RvJson", into = "RvJson")]
pub struct DiscreteRV {
    atoms: Vec<Atom>,
}

/// File representation: `{"atoms": [[value, prob_num, prob_den], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RvJson {
    pub atoms: Vec<(f64, u64, u64)>,
}

impl TryFrom<RvJson> for DiscreteRV {
    type Error = Error;

    fn try_from(raw: RvJson) -> Result<Self> {
        let mut atoms = Vec::with_capacity(raw.atoms.len());
        for (value, num, den) in raw.atoms {
            if den == 0 {
                return Err(Error::InvalidDistribution("zero denominator".into()));
            }
            atoms.push((value, num as f64 / den as f64));
        }
        DiscreteRV::new(atoms)
    }
}

impl From<DiscreteRV> for RvJson {
    fn from(rv: DiscreteRV) -> Self {
        RvJson {
            atoms: rv
                .atoms
                .iter()
                .map(|a| {
                    let (num, den) = to_rational(a.prob, 1_000_000_000);
                    (a.value, num, den)
                })
                .collect(),
        }
    }
}

/// Best rational approximation with a bounded denominator (continued fractions).
fn to_rational(x: f64, max_den: u64) -> (u64, u64) {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let a_int = a as u64;
        let k2 = a_int.saturating_mul(k1).saturating_add(k0);
        if k2 > max_den {
            break;
        }
        let h2 = a_int.saturating_mul(h1).saturating_add(h0);
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = r - a;
        if frac < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 == 0 {
        (0, 1)
    } else {
        (h1, k1)
    }
}

impl DiscreteRV {
    /// Builds a distribution from `(value, probability)` pairs.
    ///
    /// Pairs are sorted, equal values merged and zero-probability atoms dropped.
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let mut pairs = pairs;
        for &(v, p) in &pairs {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistribution(format!("value {v} is not a finite non-negative real")));
            }
            if !p.is_finite() || !(0.0..=1.0 + MASS_TOL).contains(&p) {
                return Err(Error::InvalidDistribution(format!("probability {p} outside [0, 1]")));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(pairs.len());
        for (value, prob) in pairs {
            if prob == 0.0 {
                continue;
            }
            match atoms.last_mut() {
                Some(last) if last.value == value => last.prob += prob,
                _ => atoms.push(Atom { value, prob }),
            }
        }
        let mass: f64 = atoms.iter().map(|a| a.prob).sum();
        if atoms.is_empty() || (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("total mass {mass} != 1")));
        }
        Ok(DiscreteRV { atoms })
    }

    pub fn deterministic(value: f64) -> Self {
        DiscreteRV::new(vec![(value, 1.0)]).expect("deterministic value must be finite and non-negative")
    }

    /// Atoms with exact rational probabilities `num / den`.
    pub fn from_rationals(atoms: &[(f64, u64, u64)]) -> Result<Self> {
        DiscreteRV::try_from(RvJson { atoms: atoms.to_vec() })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn support(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.value)
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[0].value
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].value
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value).sum()
    }

    /// `P[X <= v]`.
    pub fn cdf(&self, v: f64) -> f64 {
        let mut acc = 0.0;
        for a in &self.atoms {
            if a.value > v {
                break;
            }
            acc += a.prob;
        }
        acc.min(1.0)
    }

    /// `P[X = v]` (exact value match).
    pub fn pmf(&self, v: f64) -> f64 {
        self.atoms.iter().find(|a| a.value == v).map_or(0.0, |a| a.prob)
    }

    /// `E[max{X, v}]`.
    pub fn expected_max_with(&self, v: f64) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value.max(v)).sum::<f64>().max(v)
    }

    /// `E[(X - v)^+]`.
    pub fn expected_excess(&self, v: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value > v)
            .map(|a| a.prob * (a.value - v))
            .sum()
    }

    /// `E[X · 1{X >= t}]` and `P[X >= t]`.
    pub fn upper_tail(&self, t: f64) -> (f64, f64) {
        self.atoms
            .iter()
            .filter(|a| a.value >= t)
            .fold((0.0, 0.0), |(e, p), a| (e + a.prob * a.value, p + a.prob))
    }

    /// Distribution of `min{X, cap}`.
    pub fn capped(&self, cap: f64) -> DiscreteRV {
        if cap >= self.max_value() {
            return self.clone();
        }
        let mut atoms: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let value = a.value.min(cap);
            match atoms.last_mut() {
                Some(last) if last.value == value => last.prob += a.prob,
                _ => atoms.push(Atom { value, prob: a.prob }),
            }
        }
        DiscreteRV { atoms }
    }

    /// Rounds every atom down onto `grid`, capping at its maximum value.
    pub fn discretize_down(&self, grid: &SupportGrid) -> DiscreteRV {
        let mut atoms: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let value = grid.value(grid.floor_index(a.value));
            match atoms.last_mut() {
                Some(last) if last.value == value => last.prob += a.prob,
                _ => atoms.push(Atom { value, prob: a.prob }),
            }
        }
        DiscreteRV { atoms }
    }

    /// Reservation value: the `kappa` solving `E[(X - kappa)^+] = cost`.
    ///
    /// Returns `+inf` for zero cost and [`Error::NoIndex`] when `cost > E[X]`.
    pub fn weitzman_index(&self, cost: f64) -> Result<f64> {
        if cost.is_nan() || cost < 0.0 {
            return Err(Error::InvalidInput(format!("negative cost {cost}")));
        }
        if cost == 0.0 {
            return Ok(f64::INFINITY);
        }
        let mean = self.mean();
        if cost > mean {
            return Err(Error::NoIndex { cost, mean });
        }
        // The excess g(k) is piecewise linear with breakpoints at the atoms and
        // slope -P[X > k] between them. Scan segments [lo, hi] left to right.
        let mut lo = 0.0;
        for a in &self.atoms {
            if a.value <= lo {
                continue;
            }
            let g_hi = self.expected_excess(a.value);
            if g_hi <= cost {
                let g_lo = self.expected_excess(lo);
                let slope = 1.0 - self.cdf(lo);
                let kappa = lo + (g_lo - cost) / slope;
                return Ok(kappa.clamp(lo, a.value));
            }
            lo = a.value;
        }
        // cost > 0 while g(max) = 0, so the loop always returns.
        unreachable!("excess function must cross a positive cost before the top atom")
    }
}

/// Union of the supports of `rvs`, sorted and deduplicated.
pub fn union_support(rvs: &[&DiscreteRV]) -> Vec<f64> {
    let mut values: Vec<f64> = rvs.iter().flat_map(|rv| rv.support()).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// `P[max_i X_i <= v]` for independent variables.
pub fn cdf_of_max(rvs: &[&DiscreteRV], v: f64) -> f64 {
    rvs.iter().map(|rv| rv.cdf(v)).product()
}

/// Exact `E[max_i X_i]` for independent variables via products of CDFs.
pub fn expected_max_of_set(rvs: &[&DiscreteRV]) -> Result<f64> {
    if rvs.is_empty() {
        return Err(Error::InvalidInput("expected maximum of an empty set".into()));
    }
    let support = union_support(rvs);
    let mut prev = 0.0;
    let mut acc = 0.0;
    for v in support {
        let f = cdf_of_max(rvs, v);
        acc += v * (f - prev);
        prev = f;
    }
    Ok(acc)
}

/// `E[max_i X_i]` with the convention that the empty set has value zero.
pub fn expected_max_or_zero(rvs: &[&DiscreteRV]) -> f64 {
    if rvs.is_empty() {
        0.0
    } else {
        expected_max_of_set(rvs).unwrap_or(0.0)
    }
}

/// The arithmetic grid `{0, step, 2 step, ..., max_value}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportGrid {
    pub step: f64,
    pub max_value: f64,
}

impl SupportGrid {
    pub fn new(step: f64, max: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidInput(format!("grid step {step} must be positive")));
        }
        if !(max >= 0.0) || !max.is_finite() {
            return Err(Error::InvalidInput(format!("grid maximum {max} must be non-negative")));
        }
        let top = (max / step - TOL).ceil().max(0.0);
        Ok(SupportGrid { step, max_value: top * step })
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        (self.max_value / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, index: usize) -> f64 {
        index as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.value(j)).collect()
    }

    /// Index of the largest grid point `<= x` (capped at the top of the grid).
    pub fn floor_index(&self, x: f64) -> usize {
        let top = self.len() - 1;
        if x <= 0.0 {
            return 0;
        }
        let mut j = (x / self.step + TOL).floor() as usize;
        if j > top {
            return top;
        }
        while j > 0 && self.value(j) > x + TOL * self.step {
            j -= 1;
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(pairs: &[(f64, f64)]) -> DiscreteRV {
        DiscreteRV::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let x = rv(&[(0.0, 0.5), (2.0, 0.5)]);
        assert_eq!(x.cdf(0.0), 0.5);
        assert_eq!(x.cdf(3.0), 1.0);
        assert_eq!(rv(&[(1.0, 1.0)]).cdf(0.5), 0.0);
    }

    #[test]
    fn expected_max_with_examples() {
        assert_eq!(rv(&[(0.0, 0.5), (2.0, 0.5)]).expected_max_with(1.0), 1.5);
        assert_eq!(rv(&[(3.0, 1.0)]).expected_max_with(5.0), 5.0);
        assert_eq!(rv(&[(0.0, 0.5), (1.0, 0.5)]).expected_max_with(0.0), 0.5);
    }

    #[test]
    fn expected_excess_examples() {
        let x = rv(&[(0.0, 0.5), (2.0, 0.5)]);
        assert_eq!(x.expected_excess(1.0), 0.5);
        assert_eq!(x.expected_excess(0.0), x.mean());
        assert_eq!(rv(&[(1.0, 1.0)]).expected_excess(2.0), 0.0);
    }

    #[test]
    fn expected_max_of_set_examples() {
        let a = rv(&[(0.0, 0.5), (1.0, 0.5)]);
        assert!((expected_max_of_set(&[&a, &a]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(expected_max_of_set(&[&a]).unwrap(), 0.5);
        let b = rv(&[(0.0, 0.5), (2.0, 0.5)]);
        let c = rv(&[(1.0, 1.0)]);
        // joint outcomes: (0,1) -> 1, (2,1) -> 2, each with probability 1/2
        assert!((expected_max_of_set(&[&b, &c]).unwrap() - 1.5).abs() < 1e-15);
        assert!(expected_max_of_set(&[]).is_err());
    }

    #[test]
    fn discretize_examples() {
        let grid = SupportGrid::new(0.5, 10.0).unwrap();
        assert_eq!(rv(&[(1.3, 1.0)]).discretize_down(&grid), rv(&[(1.0, 1.0)]));
        let on_grid = rv(&[(0.5, 0.25), (3.0, 0.75)]);
        assert_eq!(on_grid.discretize_down(&grid), on_grid);
        assert_eq!(rv(&[(0.2, 0.5), (0.4, 0.5)]).discretize_down(&grid), rv(&[(0.0, 1.0)]));
        // values above the top of the grid are capped
        assert_eq!(rv(&[(25.0, 1.0)]).discretize_down(&grid), rv(&[(10.0, 1.0)]));
    }

    #[test]
    fn weitzman_examples() {
        assert_eq!(rv(&[(0.0, 0.5), (1.0, 0.5)]).weitzman_index(0.25).unwrap(), 0.5);
        assert_eq!(rv(&[(0.0, 0.5), (1.0, 0.5)]).weitzman_index(0.0).unwrap(), f64::INFINITY);
        assert_eq!(rv(&[(2.0, 1.0)]).weitzman_index(1.0).unwrap(), 1.0);
        assert!(matches!(rv(&[(2.0, 1.0)]).weitzman_index(3.0), Err(Error::NoIndex { .. })));
        // cost equal to the mean with positive minimum support gives index 0
        assert_eq!(rv(&[(2.0, 1.0)]).weitzman_index(2.0).unwrap(), 0.0);
    }

    #[test]
    fn construction_merges_and_rejects() {
        let x = rv(&[(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]);
        assert_eq!(x.atoms().len(), 2);
        assert!(DiscreteRV::new(vec![(1.0, 0.5)]).is_err());
        assert!(DiscreteRV::new(vec![(-1.0, 1.0)]).is_err());
        assert!(DiscreteRV::new(vec![]).is_err());
    }

    #[test]
    fn json_round_trip_with_rationals() {
        let x: DiscreteRV = serde_json::from_str(r#"{"atoms": [[0, 1, 3], [2.5, 2, 3]]}"#).unwrap();
        assert!((x.cdf(0.0) - 1.0 / 3.0).abs() < 1e-15);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"atoms":[[0.0,1,3],[2.5,2,3]]}"#);
        let y: DiscreteRV = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn grid_shape() {
        let g = SupportGrid::new(0.1, 1.0).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.floor_index(0.3), 3);
        assert_eq!(g.floor_index(0.29), 2);
        let g = SupportGrid::new(0.4, 1.0).unwrap();
        assert!((g.max_value - 1.2).abs() < 1e-12);
    }
}
