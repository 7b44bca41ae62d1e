//! Analytic atoms: hull mode ⊗ (polynomial × Gaussian × plane wave)
//! envelopes.  The family is closed under pointwise products, spatial and
//! hull derivations, coordinate multiplication and the partial Fourier
//! transform, which is what makes the exact oracles of the product layer
//! possible.

use crate::error::{Error, Result};
use crate::hull::{HullFunction, HullModel, HullPoint};
use crate::symbols::poly::Poly;
use crate::C64;

/// `value(ω, x) = φ(ω) · p(x−x₀) e^{−γ|x−x₀|²} e^{i x·ξ₀}`.
#[derive(Debug, Clone)]
pub struct Atom {
    pub hull: HullFunction,
    pub poly: Poly,
    pub gamma: f64,
    pub center: Vec<f64>,
    pub momentum: Vec<f64>,
}

impl Atom {
    pub fn new(
        hull: HullFunction,
        poly: Poly,
        gamma: f64,
        center: Vec<f64>,
        momentum: Vec<f64>,
    ) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::invalid("atom width γ must be positive"));
        }
        let n = center.len();
        if momentum.len() != n || poly.dim() != n {
            return Err(Error::invalid("atom envelope dimensions mismatch"));
        }
        Ok(Atom {
            hull,
            poly,
            gamma,
            center,
            momentum,
        })
    }

    /// Plain Gaussian `e^{−γ|x−x₀|²} e^{ix·ξ₀}` with a given hull part.
    pub fn gaussian(hull: HullFunction, gamma: f64, center: Vec<f64>, momentum: Vec<f64>) -> Result<Self> {
        let n = center.len();
        Atom::new(hull, Poly::one(n), gamma, center, momentum)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Standard deviation of the Gaussian factor, `σ = 1/√(2γ)`.
    pub fn sigma(&self) -> f64 {
        1.0 / (2.0 * self.gamma).sqrt()
    }

    pub fn envelope(&self, x: &[f64]) -> C64 {
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let r2: f64 = u.iter().map(|v| v * v).sum();
        let phase: f64 = x.iter().zip(&self.momentum).map(|(a, b)| a * b).sum();
        self.poly.eval(&u) * (-self.gamma * r2).exp() * C64::new(0.0, phase).exp()
    }

    pub fn value(&self, omega: &HullPoint, x: &[f64]) -> C64 {
        self.hull.evaluate(omega) * self.envelope(x)
    }

    /// Pointwise product — hull parts multiply as series, envelopes combine
    /// into a single recentered poly×Gaussian.
    pub fn product(&self, other: &Atom) -> Atom {
        let n = self.dim();
        debug_assert_eq!(n, other.dim());
        let g1 = self.gamma;
        let g2 = other.gamma;
        let gamma = g1 + g2;
        let center: Vec<f64> = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (g1 * a + g2 * b) / gamma)
            .collect();
        let dist2: f64 = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let constant = (-g1 * g2 / gamma * dist2).exp();
        let shift1: Vec<f64> = center.iter().zip(&self.center).map(|(c, a)| c - a).collect();
        let shift2: Vec<f64> = center
            .iter()
            .zip(&other.center)
            .map(|(c, b)| c - b)
            .collect();
        let poly = self
            .poly
            .shift(&shift1)
            .mul(&other.poly.shift(&shift2))
            .scale(C64::new(constant, 0.0));
        let momentum: Vec<f64> = self
            .momentum
            .iter()
            .zip(&other.momentum)
            .map(|(a, b)| a + b)
            .collect();
        Atom {
            hull: self.hull.mul(&other.hull),
            poly,
            gamma,
            center,
            momentum,
        }
    }

    /// ∂/∂x_axis of the envelope (hull part untouched):
    /// `p ↦ ∂p − 2γ u_axis p + i ξ₀_axis p`.
    pub fn derive_x(&self, axis: usize) -> Atom {
        let n = self.dim();
        let mut e = vec![0u32; n];
        e[axis] = 1;
        let u_axis = Poly::monomial(n, e, C64::new(1.0, 0.0));
        let poly = self
            .poly
            .derivative(axis)
            .add(&u_axis.mul(&self.poly).scale(C64::new(-2.0 * self.gamma, 0.0)))
            .add(&self.poly.scale(C64::new(0.0, self.momentum[axis])));
        Atom {
            poly,
            ..self.clone()
        }
    }

    /// Multiplication by the coordinate `x_axis = u_axis + x₀_axis`.
    pub fn mul_coordinate(&self, axis: usize) -> Atom {
        let n = self.dim();
        let mut e = vec![0u32; n];
        e[axis] = 1;
        let u_axis = Poly::monomial(n, e, C64::new(1.0, 0.0));
        let poly = u_axis
            .mul(&self.poly)
            .add(&self.poly.scale(C64::new(self.center[axis], 0.0)));
        Atom {
            poly,
            ..self.clone()
        }
    }

    /// Hull derivation δ^α (envelope untouched).
    pub fn derive_hull(&self, model: &HullModel, alpha: &[usize]) -> Result<Atom> {
        Ok(Atom {
            hull: self.hull.derive(model, alpha)?,
            ..self.clone()
        })
    }

    /// Hull translation θ_x (envelope untouched).
    pub fn translate_hull(&self, model: &HullModel, x: &[f64]) -> Result<Atom> {
        Ok(Atom {
            hull: self.hull.translate(model, x)?,
            ..self.clone()
        })
    }

    /// Multiply the hull part by a hull function (e.g. a field component).
    pub fn mul_hull(&self, f: &HullFunction) -> Atom {
        Atom {
            hull: self.hull.mul(f),
            ..self.clone()
        }
    }

    pub fn scale(&self, s: C64) -> Atom {
        Atom {
            poly: self.poly.scale(s),
            ..self.clone()
        }
    }

    /// Spatial reflection `g(x) ↦ g(−x)`.
    pub fn reflect(&self) -> Atom {
        Atom {
            hull: self.hull.clone(),
            poly: self.poly.reflect(),
            gamma: self.gamma,
            center: self.center.iter().map(|v| -v).collect(),
            momentum: self.momentum.iter().map(|v| -v).collect(),
        }
    }

    /// Involution `Φ°(ω,x) = conj(Φ(ω,−x))`: hull conjugated, envelope
    /// reflected and conjugated (modulation sign survives).
    pub fn involution(&self) -> Atom {
        Atom {
            hull: self.hull.conj(),
            poly: self.poly.reflect().conj(),
            gamma: self.gamma,
            center: self.center.iter().map(|v| -v).collect(),
            momentum: self.momentum.clone(),
        }
    }

    /// Exact forward transform `∫ dx e^{−ix·ξ} g(x)`; the family is closed:
    /// the result is again a poly×Gaussian atom with
    /// `γ' = 1/(4γ)`, center `ξ₀`, momentum `−x₀`.
    pub fn fourier(&self) -> Atom {
        let n = self.dim();
        let gamma_new = 1.0 / (4.0 * self.gamma);
        // G(ζ) = Σ_k c_k (i∂)^k [ (π/γ)^{n/2} e^{−|ζ|²/(4γ)} ]:
        // each i∂_l maps q ↦ i(∂_l q − ζ_l/(2γ) q).
        let norm = (std::f64::consts::PI / self.gamma).powf(n as f64 / 2.0);
        let mut result = Poly::zero(n);
        for (k, c) in self.poly.terms() {
            let mut q = Poly::one(n);
            for (axis, &kl) in k.iter().enumerate() {
                let mut e = vec![0u32; n];
                e[axis] = 1;
                let zeta = Poly::monomial(n, e, C64::new(1.0, 0.0));
                for _ in 0..kl {
                    q = q
                        .derivative(axis)
                        .add(&zeta.mul(&q).scale(C64::new(-1.0 / (2.0 * self.gamma), 0.0)))
                        .scale(C64::new(0.0, 1.0));
                }
            }
            result = result.add(&q.scale(*c));
        }
        // constant phase e^{i x₀·ξ₀} from recentering the modulation
        let phase: f64 = self
            .center
            .iter()
            .zip(&self.momentum)
            .map(|(a, b)| a * b)
            .sum();
        let poly = result.scale(C64::new(norm, 0.0)).scale(C64::new(0.0, phase).exp());
        Atom {
            hull: self.hull.clone(),
            poly,
            gamma: gamma_new,
            center: self.momentum.clone(),
            momentum: self.center.iter().map(|v| -v).collect(),
        }
    }

    /// Exact inverse transform `(2π)^{−n} ∫ dξ e^{ix·ξ} f(ξ)`.
    pub fn inverse_fourier(&self) -> Atom {
        let n = self.dim();
        let scale = (2.0 * std::f64::consts::PI).powi(-(n as i32));
        self.fourier().reflect().scale(C64::new(scale, 0.0))
    }
}
