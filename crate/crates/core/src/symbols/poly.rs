//! Multivariate polynomials with complex coefficients, the bookkeeping
//! behind the closed poly×Gaussian atom algebra.

use std::collections::BTreeMap;

use crate::C64;

/// `Σ_k c_k u^k` over multi-indices `k ∈ N^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    n: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

const EPS: f64 = 1e-300;

impl Poly {
    pub fn zero(n: usize) -> Self {
        Poly {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: C64) -> Self {
        let mut terms = BTreeMap::new();
        if c.norm() > EPS {
            terms.insert(vec![0; n], c);
        }
        Poly { n, terms }
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, C64::new(1.0, 0.0))
    }

    pub fn monomial(n: usize, k: Vec<u32>, c: C64) -> Self {
        assert_eq!(k.len(), n);
        let mut terms = BTreeMap::new();
        if c.norm() > EPS {
            terms.insert(k, c);
        }
        Poly { n, terms }
    }

    pub fn from_terms(n: usize, entries: impl IntoIterator<Item = (Vec<u32>, C64)>) -> Self {
        let mut p = Poly::zero(n);
        for (k, c) in entries {
            assert_eq!(k.len(), n);
            *p.terms.entry(k).or_insert(C64::new(0.0, 0.0)) += c;
        }
        p.prune();
        p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|k| k.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() > EPS);
    }

    pub fn add(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (k, c) in &other.terms {
            *out.terms.entry(k.clone()).or_insert(C64::new(0.0, 0.0)) += c;
        }
        out.prune();
        out
    }

    pub fn scale(&self, s: C64) -> Poly {
        let terms = self.terms.iter().map(|(k, c)| (k.clone(), c * s)).collect();
        let mut p = Poly { n: self.n, terms };
        p.prune();
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.n, other.n);
        let mut out = Poly::zero(self.n);
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                let k: Vec<u32> = k1.iter().zip(k2).map(|(a, b)| a + b).collect();
                *out.terms.entry(k).or_insert(C64::new(0.0, 0.0)) += c1 * c2;
            }
        }
        out.prune();
        out
    }

    /// ∂/∂u_axis.
    pub fn derivative(&self, axis: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (k, c) in &self.terms {
            if k[axis] == 0 {
                continue;
            }
            let mut kk = k.clone();
            kk[axis] -= 1;
            *out.terms.entry(kk).or_insert(C64::new(0.0, 0.0)) += c * f64::from(k[axis]);
        }
        out.prune();
        out
    }

    /// `p(u + s)` re-expanded in `u` (binomial expansion per axis).
    pub fn shift(&self, s: &[f64]) -> Poly {
        debug_assert_eq!(s.len(), self.n);
        let mut out = Poly::zero(self.n);
        for (k, c) in &self.terms {
            // expand Π (u_l + s_l)^{k_l}
            let mut partial: Vec<(Vec<u32>, C64)> = vec![(vec![0; self.n], *c)];
            for (axis, &kl) in k.iter().enumerate() {
                let mut next = Vec::with_capacity(partial.len() * (kl as usize + 1));
                for (idx, coef) in &partial {
                    let mut binom = 1.0_f64;
                    for j in 0..=kl {
                        // binom = C(kl, j), updated incrementally
                        if j > 0 {
                            binom *= f64::from(kl - j + 1) / f64::from(j);
                        }
                        let mut ii = idx.clone();
                        ii[axis] += j;
                        next.push((ii, coef * binom * s[axis].powi((kl - j) as i32)));
                    }
                }
                partial = next;
            }
            for (idx, coef) in partial {
                *out.terms.entry(idx).or_insert(C64::new(0.0, 0.0)) += coef;
            }
        }
        out.prune();
        out
    }

    /// `p(−u)`.
    pub fn reflect(&self) -> Poly {
        let terms = self
            .terms
            .iter()
            .map(|(k, c)| {
                let sign = if k.iter().sum::<u32>() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                (k.clone(), c * sign)
            })
            .collect();
        Poly { n: self.n, terms }
    }

    /// Coefficient-wise complex conjugate.
    pub fn conj(&self) -> Poly {
        let terms = self
            .terms
            .iter()
            .map(|(k, c)| (k.clone(), c.conj()))
            .collect();
        Poly { n: self.n, terms }
    }

    pub fn eval(&self, u: &[f64]) -> C64 {
        debug_assert_eq!(u.len(), self.n);
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in &self.terms {
            let mut m = 1.0;
            for (axis, &kl) in k.iter().enumerate() {
                m *= u[axis].powi(kl as i32);
            }
            acc += c * m;
        }
        acc
    }
}
