//! Schwartz-type symbol spaces in both realizations, with a dual backing
//! store: analytic atom sums for exact pointwise evaluation (construction,
//! kernels) and mode-resolved grid samples for the outputs of nonlinear
//! operations (twisted products produce `e^{−iħΛ}` factors that are not
//! finite mode sums).
//!
//! The partial Fourier convention is `(1⊗F)Φ(ω,ξ) = ∫dx e^{−ix·ξ}Φ(ω,x)`
//! with `(2π)^{−n}` on the inverse; the realization tag flips `X ↔ X*`.

pub mod atom;
pub mod poly;
pub mod sampled;

pub use atom::Atom;
pub use poly::Poly;
pub use sampled::{interpolate, GridSpec, Realization, SampledSymbol};

use crate::error::{Error, Result};
use crate::hull::{HullModel, HullPoint, OmegaGrid};
use crate::C64;

/// A symbol in `S(X; C₀^∞(Ω))` (Position) or `S(X*; C₀^∞(Ω))` (Momentum).
#[derive(Debug, Clone)]
pub struct Symbol {
    pub realization: Realization,
    backing: Backing,
}

#[derive(Debug, Clone)]
enum Backing {
    Atoms(Vec<Atom>),
    Sampled(SampledSymbol),
}

impl Symbol {
    pub fn from_atoms(realization: Realization, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("symbol needs at least one atom"));
        }
        let n = atoms[0].dim();
        let d = atoms[0].hull.torus_dim();
        if atoms.iter().any(|a| a.dim() != n || a.hull.torus_dim() != d) {
            return Err(Error::invalid("atoms must share spatial and torus dims"));
        }
        Ok(Symbol {
            realization,
            backing: Backing::Atoms(atoms),
        })
    }

    pub fn from_sampled(s: SampledSymbol) -> Self {
        Symbol {
            realization: s.grid.realization,
            backing: Backing::Sampled(s),
        }
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.backing {
            Backing::Atoms(a) => Some(a),
            Backing::Sampled(_) => None,
        }
    }

    pub fn sampled(&self) -> Option<&SampledSymbol> {
        match &self.backing {
            Backing::Sampled(s) => Some(s),
            Backing::Atoms(_) => None,
        }
    }

    pub fn is_atoms(&self) -> bool {
        matches!(self.backing, Backing::Atoms(_))
    }

    /// Spatial dimension n.
    pub fn dim(&self) -> usize {
        match &self.backing {
            Backing::Atoms(a) => a[0].dim(),
            Backing::Sampled(s) => s.grid.dim,
        }
    }

    /// Torus dimension d of the hull parts.
    pub fn torus_dim(&self) -> usize {
        match &self.backing {
            Backing::Atoms(a) => a[0].hull.torus_dim(),
            Backing::Sampled(s) => s.torus_dim(),
        }
    }

    /// Recorded quadrature/truncation bound (0 for exact atom sums).
    pub fn provenance_tol(&self) -> f64 {
        match &self.backing {
            Backing::Atoms(_) => 0.0,
            Backing::Sampled(s) => s.provenance_tol,
        }
    }

    /// Pointwise value; exact for atoms, interpolated for samples.
    pub fn evaluate(&self, omega: &HullPoint, x: &[f64]) -> C64 {
        match &self.backing {
            Backing::Atoms(atoms) => atoms.iter().map(|a| a.value(omega, x)).sum(),
            Backing::Sampled(s) => s.evaluate(omega, x),
        }
    }

    /// The default box for these atoms: `L = 8σ` of the widest atom,
    /// N = 64 / 32 / 16 for n = 1 / 2 / 3.
    pub fn default_grid(&self) -> Result<GridSpec> {
        let n = self.dim();
        match &self.backing {
            Backing::Sampled(s) => Ok(s.grid),
            Backing::Atoms(atoms) => {
                let sigma = atoms.iter().map(|a| a.sigma()).fold(0.0, f64::max);
                let l = (8.0 * sigma).max(1.0);
                let pts = match n {
                    1 => 64,
                    2 => 32,
                    _ => 16,
                };
                GridSpec::new(l, pts, n, self.realization)
            }
        }
    }

    /// Sample onto a grid (atoms evaluated exactly at the nodes).
    pub fn sample(&self, grid: &GridSpec) -> Result<SampledSymbol> {
        if grid.realization != self.realization {
            return Err(Error::invalid("grid realization mismatch"));
        }
        match &self.backing {
            Backing::Sampled(s) => {
                if s.grid == *grid {
                    Ok(s.clone())
                } else {
                    // resample through interpolation; provenance inflates
                    let npts = grid.len();
                    let mut modes = Vec::new();
                    let mut data = Vec::new();
                    for (mi, m) in s.modes().iter().enumerate() {
                        modes.push(m.clone());
                        for flat in 0..npts {
                            let x = grid.point(flat);
                            data.push(interpolate(s.mode_slice(mi), &s.grid, &x));
                        }
                    }
                    SampledSymbol::new(
                        *grid,
                        s.torus_dim(),
                        modes,
                        data,
                        s.provenance_tol + s.grid.spacing().powi(4),
                    )
                }
            }
            Backing::Atoms(atoms) => {
                let npts = grid.len();
                use std::collections::BTreeMap;
                let mut acc: BTreeMap<Vec<i32>, Vec<C64>> = BTreeMap::new();
                for a in atoms {
                    let envelope: Vec<C64> =
                        (0..npts).map(|flat| a.envelope(&grid.point(flat))).collect();
                    for (m, c) in a.hull.modes() {
                        let slot = acc
                            .entry(m.clone())
                            .or_insert_with(|| vec![C64::new(0.0, 0.0); npts]);
                        for (s, e) in slot.iter_mut().zip(&envelope) {
                            *s += c * e;
                        }
                    }
                }
                let mut modes = Vec::with_capacity(acc.len());
                let mut data = Vec::with_capacity(acc.len() * npts);
                for (m, vals) in acc {
                    modes.push(m);
                    data.extend(vals);
                }
                SampledSymbol::new(*grid, self.torus_dim(), modes, data, 0.0)
            }
        }
    }

    /// Partial Fourier transform; flips the realization.  Atom sums
    /// transform exactly within the closed family, samples go through the
    /// phased FFT.
    pub fn partial_fourier(&self) -> Result<Symbol> {
        let flipped = match self.realization {
            Realization::Position => Realization::Momentum,
            Realization::Momentum => Realization::Position,
        };
        match &self.backing {
            Backing::Atoms(atoms) => Ok(Symbol {
                realization: flipped,
                backing: Backing::Atoms(atoms.iter().map(Atom::fourier).collect()),
            }),
            Backing::Sampled(s) => Ok(Symbol::from_sampled(s.fourier(false))),
        }
    }

    /// Inverse partial Fourier transform (`(2π)^{−n}`, opposite phase).
    pub fn inverse_partial_fourier(&self) -> Result<Symbol> {
        let flipped = match self.realization {
            Realization::Position => Realization::Momentum,
            Realization::Momentum => Realization::Position,
        };
        match &self.backing {
            Backing::Atoms(atoms) => Ok(Symbol {
                realization: flipped,
                backing: Backing::Atoms(atoms.iter().map(Atom::inverse_fourier).collect()),
            }),
            Backing::Sampled(s) => Ok(Symbol::from_sampled(s.fourier(true))),
        }
    }

    /// Involution `S°(ω,x) = conj(S(ω,−x))`.
    pub fn involution(&self) -> Symbol {
        match &self.backing {
            Backing::Atoms(atoms) => Symbol {
                realization: self.realization,
                backing: Backing::Atoms(atoms.iter().map(Atom::involution).collect()),
            },
            Backing::Sampled(s) => Symbol::from_sampled(s.involution()),
        }
    }
}

/// Weighted derivative `Q^a ∂^α δ^β S` (operator order fixed: δ first, then
/// the grid derivative, then the coordinate weight).  δ is exact on modes
/// and Q on values; ∂ uses 4th-order centered differences on samples, so a
/// nonzero α forces sampled backing (atoms are sampled on their default
/// grid first).
pub fn apply_weights(
    model: &HullModel,
    symbol: &Symbol,
    a: &[usize],
    alpha: &[usize],
    beta: &[usize],
) -> Result<Symbol> {
    if a.iter().all(|&v| v == 0)
        && alpha.iter().all(|&v| v == 0)
        && beta.iter().all(|&v| v == 0)
    {
        return Ok(symbol.clone());
    }
    let grid = symbol.default_grid()?;
    let mut s = symbol.sample(&grid)?;
    s = s.derive_hull(model, beta)?;
    for (axis, &count) in alpha.iter().enumerate() {
        for _ in 0..count {
            s = s.derive_grid(axis);
        }
    }
    if a.iter().any(|&v| v > 0) {
        s = s.mul_coordinate_power(a);
    }
    Ok(Symbol::from_sampled(s))
}

/// Def-4 style seminorm `sup_{grid×ωgrid} |Q^a ∂^α δ^β S|` — a lower bound
/// of the true sup; returns `(sup, provenance tolerance)`.
pub fn seminorm(
    model: &HullModel,
    symbol: &Symbol,
    a: &[usize],
    alpha: &[usize],
    beta: &[usize],
    omega_grid: &OmegaGrid,
) -> Result<(f64, f64)> {
    let weighted = apply_weights(model, symbol, a, alpha, beta)?;
    let tol = weighted.provenance_tol();
    let grid = weighted.default_grid()?;
    let s = weighted.sample(&grid)?;
    let mut sup = 0.0_f64;
    for w in omega_grid.points() {
        for flat in 0..s.grid.len() {
            sup = sup.max(s.value_at_index(&w, flat).norm());
        }
    }
    Ok((sup, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::HullFunction;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn unit_gaussian_1d() -> Symbol {
        let a = Atom::gaussian(
            HullFunction::constant(1, c(1.0, 0.0)),
            0.5,
            vec![0.0],
            vec![0.0],
        )
        .unwrap();
        Symbol::from_atoms(Realization::Position, vec![a]).unwrap()
    }

    #[test]
    fn evaluate_atom_basics() {
        let s = unit_gaussian_1d();
        let w = HullPoint::zero(1);
        assert!((s.evaluate(&w, &[0.0]) - c(1.0, 0.0)).norm() < 1e-15);
        let far = s.evaluate(&w, &[6.0]).norm();
        assert!(far <= (-0.5 * 36.0_f64).exp() + 1e-18);
    }

    #[test]
    fn sampled_copy_matches_atom_off_grid() {
        let s = unit_gaussian_1d();
        let grid = s.default_grid().unwrap();
        let sam = Symbol::from_sampled(s.sample(&grid).unwrap());
        let w = HullPoint::zero(1);
        let mut worst = 0.0_f64;
        for i in 0..37 {
            let x = -5.7 + 0.317 * i as f64;
            let err = (sam.evaluate(&w, &[x]) - s.evaluate(&w, &[x])).norm();
            worst = worst.max(err);
        }
        // h = 0.25 → C·h⁴ with a modest constant
        assert!(worst < 1e-3, "interpolation error {worst}");
    }

    #[test]
    fn partial_fourier_gaussian_atoms_and_grid_agree() {
        let s = unit_gaussian_1d();
        let exact = s.partial_fourier().unwrap();
        let grid = s.default_grid().unwrap();
        let viafft = Symbol::from_sampled(s.sample(&grid).unwrap().fourier(false));
        let w = HullPoint::zero(1);
        for k in 0..64 {
            let xi = viafft.sampled().unwrap().grid.point(k)[0];
            let a = exact.evaluate(&w, &[xi]);
            let b = viafft.evaluate(&w, &[xi]);
            assert!((a - b).norm() < 1e-8, "ξ={xi}: {a} vs {b}");
        }
        assert_eq!(exact.realization, Realization::Momentum);
    }

    #[test]
    fn apply_weights_identity() {
        let model = HullModel::identity(1);
        let s = unit_gaussian_1d();
        let out = apply_weights(&model, &s, &[0], &[0], &[0]).unwrap();
        assert!(out.is_atoms());
    }

    #[test]
    fn apply_weights_grid_derivative_order() {
        // ∂ of the sampled Gaussian vs the exact atom derivative: sup error
        // drops by ≈ 2⁴ when h halves.
        let model = HullModel::identity(1);
        let s = unit_gaussian_1d();
        let atom = &s.atoms().unwrap()[0];
        let exact = atom.derive_x(0);
        let w = HullPoint::zero(1);
        let err_at = |pts: usize| {
            let grid = GridSpec::new(8.0, pts, 1, Realization::Position).unwrap();
            let sam = Symbol::from_sampled(s.sample(&grid).unwrap());
            let d = apply_weights(&model, &sam, &[0], &[1], &[0]).unwrap();
            let ds = d.sampled().unwrap();
            let mut worst = 0.0_f64;
            for flat in 0..ds.grid.len() {
                let x = ds.grid.point(flat);
                let got = ds.value_at_index(&w, flat);
                worst = worst.max((got - exact.value(&w, &x)).norm());
            }
            worst
        };
        let e1 = err_at(64);
        let e2 = err_at(128);
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "observed FD order {order}");
    }

    #[test]
    fn delta_of_omega_independent_symbol_vanishes() {
        let model = HullModel::identity(1);
        let s = unit_gaussian_1d();
        let out = apply_weights(&model, &s, &[0], &[0], &[1]).unwrap();
        let grid = OmegaGrid::new(1, 4).unwrap();
        let (sup, _) = seminorm(&model, &out, &[0], &[0], &[0], &grid).unwrap();
        assert!(sup < 1e-15);
    }

    #[test]
    fn seminorm_examples() {
        let model = HullModel::identity(1);
        let wgrid = OmegaGrid::new(1, 4).unwrap();
        let s = unit_gaussian_1d();
        let (sup, _) = seminorm(&model, &s, &[0], &[0], &[0], &wgrid).unwrap();
        assert!((sup - 1.0).abs() < 1e-12);
        // ‖Q₁ g‖ = max |x e^{−x²/2}| = e^{−1/2} (max at x = 1, on the grid)
        let (sup, _) = seminorm(&model, &s, &[1], &[0], &[0], &wgrid).unwrap();
        assert!((sup - (-0.5_f64).exp()).abs() < 1e-10, "got {sup}");
    }

    #[test]
    fn def4_membership_seminorms_finite() {
        let model = HullModel::identity(2);
        let hull = HullFunction::cosine(2, vec![1, 0]).unwrap();
        let a = Atom::gaussian(hull, 0.5, vec![0.1, -0.2], vec![0.4, 0.0]).unwrap();
        let s = Symbol::from_atoms(Realization::Position, vec![a]).unwrap();
        let wgrid = OmegaGrid::new(2, 4).unwrap();
        for total in crate::numerics::multi_indices_up_to(2, 2) {
            let (sup, _) = seminorm(&model, &s, &total, &total, &total, &wgrid).unwrap();
            assert!(sup.is_finite());
        }
    }

    #[test]
    fn involution_fixed_point_and_square() {
        let s = unit_gaussian_1d();
        let w = HullPoint::zero(1);
        // real even ω-independent symbol is a fixed point
        let inv = s.involution();
        for &x in &[-1.0, 0.3, 2.0] {
            assert!((inv.evaluate(&w, &[x]) - s.evaluate(&w, &[x])).norm() < 1e-13);
        }
        // involution ∘ involution = id for a modulated atom
        let a = Atom::gaussian(
            HullFunction::harmonic(1, vec![1]).unwrap(),
            0.7,
            vec![0.4],
            vec![1.3],
        )
        .unwrap();
        let s2 = Symbol::from_atoms(Realization::Position, vec![a]).unwrap();
        let back = s2.involution().involution();
        let w = HullPoint::new(vec![0.8]);
        for &x in &[-0.9, 0.0, 1.4] {
            assert!((back.evaluate(&w, &[x]) - s2.evaluate(&w, &[x])).norm() < 1e-13);
        }
        // modulated atom: involution matches conj(S(ω,−x)) pointwise
        let inv2 = s2.involution();
        for &x in &[-1.2, 0.5] {
            let want = s2.evaluate(&w, &[-x]).conj();
            assert!((inv2.evaluate(&w, &[x]) - want).norm() < 1e-13);
        }
    }

    #[test]
    fn sampled_involution_matches_atom_involution() {
        let a = Atom::gaussian(
            HullFunction::harmonic(1, vec![1]).unwrap(),
            0.5,
            vec![0.3],
            vec![0.9],
        )
        .unwrap();
        let s = Symbol::from_atoms(Realization::Position, vec![a]).unwrap();
        let grid = s.default_grid().unwrap();
        let via_atoms = s.involution();
        let via_grid = Symbol::from_sampled(s.sample(&grid).unwrap().involution());
        let w = HullPoint::new(vec![1.1]);
        for k in 1..64 {
            let x = grid.point(k);
            let u = via_atoms.evaluate(&w, &x);
            let v = via_grid.evaluate(&w, &x);
            assert!((u - v).norm() < 1e-10, "x={:?}: {u} vs {v}", x);
        }
    }
}
