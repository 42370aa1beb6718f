//! Numeric check of the information identity that motivates alignment:
//! for any joint distribution over (G, G', Ŷ) — original input, explained
//! sub-input and model prediction — the three-way (interaction)
//! information decomposes as
//!
//! I(G; G'; Ŷ) = I(G'; Ŷ) + I(G; G') + H(G' | G, Ŷ) − H(G').
//!
//! Maximizing I(G'; Ŷ) alone (the usual masking objective) therefore
//! leaves the I(G; G') term free; the alignment losses target exactly that
//! slack. Everything here is in nats with the convention 0·ln 0 = 0.

use crate::error::{Error, Result};

/// A dense joint probability table over three finite variables
/// (G, G', Ŷ), each with at most 16 states.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteJoint {
    dims: [usize; 3],
    /// Row-major over (g, g', y): index = (g·dims[1] + g')·dims[2] + y.
    p: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(dims: [usize; 3], p: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0 || d > 16) {
            return Err(Error::Config(format!(
                "joint dimensions {dims:?} must lie in 1..=16"
            )));
        }
        if p.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::DimMismatch(format!(
                "{} entries for a {}x{}x{} table",
                p.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::Config("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteJoint { dims, p })
    }

    /// Normalize arbitrary non-negative weights into a joint.
    pub fn from_weights(dims: [usize; 3], weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Config("weights must have a positive finite sum".into()));
        }
        Self::new(dims, weights.iter().map(|w| w / total).collect())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn prob(&self, g: usize, gp: usize, y: usize) -> f64 {
        self.p[(g * self.dims[1] + gp) * self.dims[2] + y]
    }

    /// Entropy of the marginal over the variable subset selected by
    /// `keep` (e.g. [true, false, true] → H(G, Ŷ)). Empty subset → 0.
    fn marginal_entropy(&self, keep: [bool; 3]) -> f64 {
        let kept_dims: Vec<usize> = (0..3).filter(|&a| keep[a]).map(|a| self.dims[a]).collect();
        let size = kept_dims.iter().product::<usize>().max(1);
        let mut marg = vec![0.0; size];
        for g in 0..self.dims[0] {
            for gp in 0..self.dims[1] {
                for y in 0..self.dims[2] {
                    let coords = [g, gp, y];
                    let mut idx = 0;
                    for a in 0..3 {
                        if keep[a] {
                            idx = idx * self.dims[a] + coords[a];
                        }
                    }
                    marg[idx] += self.prob(g, gp, y);
                }
            }
        }
        -marg
            .iter()
            .map(|&q| if q > 0.0 { q * q.ln() } else { 0.0 })
            .sum::<f64>()
    }
}

const G: usize = 0;
const GP: usize = 1;
const Y: usize = 2;

fn keep(vars: &[usize]) -> [bool; 3] {
    let mut k = [false; 3];
    for &v in vars {
        k[v] = true;
    }
    k
}

/// Both sides of the identity: (direct interaction information from the
/// inclusion–exclusion of entropies, decomposition from the right-hand
/// side). The identity asserts they are equal for every valid joint.
pub fn three_way_information(d: &DiscreteJoint) -> (f64, f64) {
    let h = |vars: &[usize]| d.marginal_entropy(keep(vars));

    let direct = h(&[G]) + h(&[GP]) + h(&[Y]) - h(&[G, GP]) - h(&[G, Y]) - h(&[GP, Y])
        + h(&[G, GP, Y]);

    let i_gp_y = h(&[GP]) + h(&[Y]) - h(&[GP, Y]);
    let i_g_gp = h(&[G]) + h(&[GP]) - h(&[G, GP]);
    let h_gp_given_g_y = h(&[G, GP, Y]) - h(&[G, Y]);
    let decomposed = i_gp_y + i_g_gp + h_gp_given_g_y - h(&[GP]);

    (direct, decomposed)
}

/// Absolute difference between the two sides of the identity. Small
/// residuals (≤ 1e-10) certify the decomposition numerically.
pub fn mi_identity_check(d: &DiscreteJoint) -> f64 {
    let (direct, decomposed) = three_way_information(d);
    (direct - decomposed).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand::Rng;

    #[test]
    fn validation_rejects_bad_tables() {
        assert!(DiscreteJoint::new([0, 2, 2], vec![]).is_err());
        assert!(DiscreteJoint::new([17, 1, 1], vec![1.0; 17]).is_err());
        assert!(DiscreteJoint::new([2, 1, 1], vec![0.5]).is_err());
        assert!(DiscreteJoint::new([2, 1, 1], vec![0.7, 0.7]).is_err());
        assert!(DiscreteJoint::new([2, 1, 1], vec![-0.1, 1.1]).is_err());
        assert!(DiscreteJoint::from_weights([1, 1, 1], &[0.0]).is_err());
    }

    #[test]
    fn independent_uniform_bits_carry_no_interaction() {
        let d = DiscreteJoint::new([2, 2, 2], vec![0.125; 8]).unwrap();
        let (direct, decomposed) = three_way_information(&d);
        assert!(direct.abs() <= 1e-15);
        assert!(decomposed.abs() <= 1e-15);
        assert!(mi_identity_check(&d) <= 1e-15);
    }

    #[test]
    fn fully_copied_bit_gives_ln_two_on_both_sides() {
        // G = G' = Ŷ, uniform: mass 1/2 on (0,0,0) and (1,1,1). By hand,
        // I(G';Ŷ) = I(G;G') = ln 2, H(G'|G,Ŷ) = 0, H(G') = ln 2, so both
        // sides equal ln 2.
        let mut p = vec![0.0; 8];
        p[0] = 0.5;
        p[7] = 0.5;
        let d = DiscreteJoint::new([2, 2, 2], p).unwrap();
        let (direct, decomposed) = three_way_information(&d);
        assert!((direct - 2f64.ln()).abs() <= 1e-12);
        assert!((decomposed - 2f64.ln()).abs() <= 1e-12);
        assert!(mi_identity_check(&d) <= 1e-12);
    }

    /// Independent oracle: the interaction information written as a single
    /// sum over cells of ln[p(gg')p(gy)p(g'y) / (p(g)p(g')p(y)p(gg'y))],
    /// with marginals recomputed from scratch here.
    fn cell_sum_oracle(d: &DiscreteJoint) -> f64 {
        let [ng, ngp, ny] = d.dims();
        let mut pg = vec![0.0; ng];
        let mut pgp = vec![0.0; ngp];
        let mut py = vec![0.0; ny];
        let mut pggp = vec![0.0; ng * ngp];
        let mut pgy = vec![0.0; ng * ny];
        let mut pgpy = vec![0.0; ngp * ny];
        for g in 0..ng {
            for gp in 0..ngp {
                for y in 0..ny {
                    let q = d.prob(g, gp, y);
                    pg[g] += q;
                    pgp[gp] += q;
                    py[y] += q;
                    pggp[g * ngp + gp] += q;
                    pgy[g * ny + y] += q;
                    pgpy[gp * ny + y] += q;
                }
            }
        }
        let mut total = 0.0;
        for g in 0..ng {
            for gp in 0..ngp {
                for y in 0..ny {
                    let q = d.prob(g, gp, y);
                    if q > 0.0 {
                        total += q
                            * (pggp[g * ngp + gp] * pgy[g * ny + y] * pgpy[gp * ny + y]
                                / (pg[g] * pgp[gp] * py[y] * q))
                                .ln();
                    }
                }
            }
        }
        total
    }

    #[test]
    fn residual_tiny_on_a_thousand_random_joints() {
        let mut rng = seeding::rng(31337);
        for trial in 0..1000 {
            let weights: Vec<f64> = (0..64)
                .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen::<f64>() })
                .collect();
            let d = match DiscreteJoint::from_weights([4, 4, 4], &weights) {
                Ok(d) => d,
                Err(_) => continue, // all-zero draw
            };
            let residual = mi_identity_check(&d);
            assert!(residual <= 1e-10, "trial {trial}: residual {residual}");
            let (direct, _) = three_way_information(&d);
            let oracle = cell_sum_oracle(&d);
            assert!(
                (direct - oracle).abs() <= 1e-10,
                "trial {trial}: direct {direct} vs oracle {oracle}"
            );
        }
    }
}
