//! Sampled symbols: hull-mode-resolved tensors on a uniform spatial grid.
//!
//! The ω-dependence stays exact (finite Fourier modes), the spatial
//! dependence is a grid sample with cubic off-grid interpolation and zero
//! extension beyond the box.  The continuum partial Fourier transform is
//! realized axis-by-axis through phased FFTs on the grid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::{HullModel, HullPoint, Mode};
use crate::numerics::{fft_nd, unflatten};
use crate::C64;

/// Which variable the grid discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Realization {
    /// Configuration space `X`.
    Position,
    /// Dual space `X*`.
    Momentum,
}

/// Uniform box `[−L, L)^n`, `N` points per axis, spacing `h = 2L/N`,
/// rectangle-rule weight `h^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
    pub dim: usize,
    pub realization: Realization,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize, dim: usize, realization: Realization) -> Result<Self> {
        if half_width <= 0.0 {
            return Err(Error::invalid("grid half-width must be positive"));
        }
        if points == 0 || !points.is_power_of_two() {
            return Err(Error::invalid("grid points per axis must be a power of two"));
        }
        Ok(GridSpec {
            half_width,
            points,
            dim,
            realization,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight `h^n`.
    pub fn weight(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        unflatten(flat, self.dim, self.points)
            .into_iter()
            .map(|i| self.coord(i))
            .collect()
    }

    /// The dual grid under the continuum Fourier transform: same N,
    /// spacing `π/L`, realization flipped.
    pub fn dual(&self) -> GridSpec {
        GridSpec {
            half_width: self.points as f64 * std::f64::consts::PI / (2.0 * self.half_width),
            points: self.points,
            dim: self.dim,
            realization: match self.realization {
                Realization::Position => Realization::Momentum,
                Realization::Momentum => Realization::Position,
            },
        }
    }
}

/// Mode-resolved sample: `S(ω, x_i) = Σ_m data[m][i] e^{i m·ω}`.
#[derive(Debug, Clone)]
pub struct SampledSymbol {
    pub grid: GridSpec,
    torus_dim: usize,
    modes: Vec<Mode>,
    /// Row-major `[mode][grid point]`.
    data: Vec<C64>,
    pub provenance_tol: f64,
}

impl SampledSymbol {
    pub fn new(
        grid: GridSpec,
        torus_dim: usize,
        modes: Vec<Mode>,
        data: Vec<C64>,
        provenance_tol: f64,
    ) -> Result<Self> {
        if modes.len() * grid.len() != data.len() {
            return Err(Error::invalid("sampled symbol tensor shape mismatch"));
        }
        Ok(SampledSymbol {
            grid,
            torus_dim,
            modes,
            data,
            provenance_tol,
        })
    }

    pub fn zero(grid: GridSpec, torus_dim: usize) -> Self {
        SampledSymbol {
            grid,
            torus_dim,
            modes: vec![],
            data: vec![],
            provenance_tol: 0.0,
        }
    }

    pub fn torus_dim(&self) -> usize {
        self.torus_dim
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode_slice(&self, mode_idx: usize) -> &[C64] {
        let npts = self.grid.len();
        &self.data[mode_idx * npts..(mode_idx + 1) * npts]
    }

    pub fn mode_slice_mut(&mut self, mode_idx: usize) -> &mut [C64] {
        let npts = self.grid.len();
        &mut self.data[mode_idx * npts..(mode_idx + 1) * npts]
    }

    /// Drop modes whose sup over the grid is below `eps` times the overall
    /// maximum (keeps product outputs sparse).
    pub fn prune_modes(&mut self, eps: f64) {
        let npts = self.grid.len();
        let maxima: Vec<f64> = (0..self.modes.len())
            .map(|mi| {
                self.mode_slice(mi)
                    .iter()
                    .map(|c| c.norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        let overall = maxima.iter().fold(0.0_f64, |a, &b| a.max(b));
        if overall == 0.0 {
            self.modes.clear();
            self.data.clear();
            return;
        }
        let keep: Vec<usize> = (0..self.modes.len())
            .filter(|&mi| maxima[mi] > eps * overall)
            .collect();
        let mut new_modes = Vec::with_capacity(keep.len());
        let mut new_data = Vec::with_capacity(keep.len() * npts);
        for &mi in &keep {
            new_modes.push(self.modes[mi].clone());
            new_data.extend_from_slice(self.mode_slice(mi));
        }
        self.modes = new_modes;
        self.data = new_data;
    }

    /// Linear combination `self + s·other` on a shared grid; mode supports
    /// merge.
    pub fn add_scaled(&self, other: &SampledSymbol, s: C64) -> Result<SampledSymbol> {
        if self.grid != other.grid {
            return Err(Error::invalid("sampled symbols live on different grids"));
        }
        let npts = self.grid.len();
        let mut acc: BTreeMap<Mode, Vec<C64>> = BTreeMap::new();
        for (mi, m) in self.modes.iter().enumerate() {
            acc.insert(m.clone(), self.mode_slice(mi).to_vec());
        }
        for (mi, m) in other.modes.iter().enumerate() {
            let slot = acc
                .entry(m.clone())
                .or_insert_with(|| vec![C64::new(0.0, 0.0); npts]);
            for (a, b) in slot.iter_mut().zip(other.mode_slice(mi)) {
                *a += s * b;
            }
        }
        let mut modes = Vec::with_capacity(acc.len());
        let mut data = Vec::with_capacity(acc.len() * npts);
        for (m, vals) in acc {
            modes.push(m);
            data.extend(vals);
        }
        Ok(SampledSymbol {
            grid: self.grid,
            torus_dim: self.torus_dim,
            modes,
            data,
            provenance_tol: self.provenance_tol + s.norm() * other.provenance_tol,
        })
    }

    pub fn scale(&self, s: C64) -> SampledSymbol {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out.provenance_tol = self.provenance_tol * s.norm();
        out
    }

    /// Pointwise product (hull modes convolve, grid values multiply).
    pub fn mul_pointwise(&self, other: &SampledSymbol) -> Result<SampledSymbol> {
        if self.grid != other.grid {
            return Err(Error::invalid("sampled symbols live on different grids"));
        }
        let npts = self.grid.len();
        let mut acc: BTreeMap<Mode, Vec<C64>> = BTreeMap::new();
        for (mi, m1) in self.modes.iter().enumerate() {
            for (mj, m2) in other.modes.iter().enumerate() {
                let m: Mode = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                let slot = acc
                    .entry(m)
                    .or_insert_with(|| vec![C64::new(0.0, 0.0); npts]);
                for ((s, a), b) in slot
                    .iter_mut()
                    .zip(self.mode_slice(mi))
                    .zip(other.mode_slice(mj))
                {
                    *s += a * b;
                }
            }
        }
        let mut modes = Vec::with_capacity(acc.len());
        let mut data = Vec::with_capacity(acc.len() * npts);
        for (m, vals) in acc {
            modes.push(m);
            data.extend(vals);
        }
        SampledSymbol::new(
            self.grid,
            self.torus_dim,
            modes,
            data,
            self.provenance_tol + other.provenance_tol,
        )
    }

    /// Multiply the hull part by a fixed hull function.
    pub fn mul_hull(&self, f: &crate::hull::HullFunction) -> SampledSymbol {
        let npts = self.grid.len();
        let mut acc: BTreeMap<Mode, Vec<C64>> = BTreeMap::new();
        for (mi, m1) in self.modes.iter().enumerate() {
            for (m2, c) in f.modes() {
                let m: Mode = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                let slot = acc
                    .entry(m)
                    .or_insert_with(|| vec![C64::new(0.0, 0.0); npts]);
                for (s, a) in slot.iter_mut().zip(self.mode_slice(mi)) {
                    *s += c * a;
                }
            }
        }
        let mut modes = Vec::with_capacity(acc.len());
        let mut data = Vec::with_capacity(acc.len() * npts);
        for (m, vals) in acc {
            modes.push(m);
            data.extend(vals);
        }
        SampledSymbol {
            grid: self.grid,
            torus_dim: self.torus_dim,
            modes,
            data,
            provenance_tol: self.provenance_tol * f.coeff_l1().max(1.0),
        }
    }

    /// Value at (ω, grid point).
    pub fn value_at_index(&self, omega: &HullPoint, flat: usize) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let npts = self.grid.len();
        for (mi, m) in self.modes.iter().enumerate() {
            let phase: f64 = m
                .iter()
                .zip(omega.angles())
                .map(|(&a, &b)| f64::from(a) * b)
                .sum();
            acc += self.data[mi * npts + flat] * C64::new(0.0, phase).exp();
        }
        acc
    }

    /// Evaluate anywhere: exact trig interpolation in ω, separable cubic
    /// Lagrange interpolation in the grid variable, zero outside the box.
    pub fn evaluate(&self, omega: &HullPoint, x: &[f64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (mi, m) in self.modes.iter().enumerate() {
            let phase: f64 = m
                .iter()
                .zip(omega.angles())
                .map(|(&a, &b)| f64::from(a) * b)
                .sum();
            let spatial = interpolate(self.mode_slice(mi), &self.grid, x);
            acc += spatial * C64::new(0.0, phase).exp();
        }
        acc
    }

    /// θ_shift on the hull part: pure mode phases, exact.
    pub fn translate_hull(&self, model: &HullModel, shift: &[f64]) -> Result<SampledSymbol> {
        let mut out = self.clone();
        let npts = self.grid.len();
        for (mi, m) in self.modes.iter().enumerate() {
            let phase = C64::new(0.0, model.mode_phase(m, shift)).exp();
            for v in &mut out.data[mi * npts..(mi + 1) * npts] {
                *v *= phase;
            }
        }
        Ok(out)
    }

    /// δ^α on the hull part: mode multipliers, exact.
    pub fn derive_hull(&self, model: &HullModel, alpha: &[usize]) -> Result<SampledSymbol> {
        let mut out = self.clone();
        let npts = self.grid.len();
        for (mi, m) in self.modes.iter().enumerate() {
            let freq = model.mode_frequency(m);
            let mut factor = C64::new(1.0, 0.0);
            for (l, &al) in alpha.iter().enumerate() {
                for _ in 0..al {
                    factor *= C64::new(0.0, freq[l]);
                }
            }
            for v in &mut out.data[mi * npts..(mi + 1) * npts] {
                *v *= factor;
            }
        }
        Ok(out)
    }

    /// Multiply by the grid coordinate monomial `x^a`.
    pub fn mul_coordinate_power(&self, a: &[usize]) -> SampledSymbol {
        let mut out = self.clone();
        let npts = self.grid.len();
        let factors: Vec<f64> = (0..npts)
            .map(|flat| {
                let pt = self.grid.point(flat);
                let mut f = 1.0;
                for (axis, &pw) in a.iter().enumerate() {
                    f *= pt[axis].powi(pw as i32);
                }
                f
            })
            .collect();
        for mi in 0..self.modes.len() {
            for (v, f) in out.data[mi * npts..(mi + 1) * npts].iter_mut().zip(&factors) {
                *v *= *f;
            }
        }
        out
    }

    /// 4th-order centered difference along one grid axis, zero beyond the
    /// box (inflates the provenance tolerance by an O(h⁴) budget).
    pub fn derive_grid(&self, axis: usize) -> SampledSymbol {
        let n = self.grid.dim;
        let pts = self.grid.points;
        let h = self.grid.spacing();
        let npts = self.grid.len();
        let stride = pts.pow((n - 1 - axis) as u32);
        let mut out = self.clone();
        let mut sup = 0.0_f64;
        for mi in 0..self.modes.len() {
            let src = self.mode_slice(mi).to_vec();
            let dst = out.mode_slice_mut(mi);
            for flat in 0..npts {
                let i = (flat / stride) % pts;
                let at = |k: isize| -> C64 {
                    let ii = i as isize + k;
                    if ii < 0 || ii >= pts as isize {
                        C64::new(0.0, 0.0)
                    } else {
                        src[(flat as isize + k * stride as isize) as usize]
                    }
                };
                dst[flat] =
                    (-at(2) + at(1) * 8.0 - at(-1) * 8.0 + at(-2)) / (12.0 * h);
                sup = sup.max(dst[flat].norm());
            }
        }
        // crude h⁴ error budget relative to the derivative scale
        out.provenance_tol = self.provenance_tol + h.powi(4) * sup;
        out
    }

    /// Involution `conj(S(ω,−x))`: modes flip and conjugate, the grid
    /// reflects with periodic wrap (the `+L` face aliases `−L`, where the
    /// symbol is tail-small; the wrap residue lands in the tolerance).
    pub fn involution(&self) -> SampledSymbol {
        let n = self.grid.dim;
        let pts = self.grid.points;
        let npts = self.grid.len();
        let mut entries: BTreeMap<Mode, Vec<C64>> = BTreeMap::new();
        for (mi, m) in self.modes.iter().enumerate() {
            let neg: Mode = m.iter().map(|v| -v).collect();
            let src = self.mode_slice(mi);
            let mut vals = vec![C64::new(0.0, 0.0); npts];
            for flat in 0..npts {
                let idx = unflatten(flat, n, pts);
                let mut rflat = 0usize;
                for &i in &idx {
                    rflat = rflat * pts + (pts - i) % pts;
                }
                vals[flat] = src[rflat].conj();
            }
            entries
                .entry(neg)
                .and_modify(|e| {
                    for (a, b) in e.iter_mut().zip(&vals) {
                        *a += b;
                    }
                })
                .or_insert(vals);
        }
        let mut modes = Vec::with_capacity(entries.len());
        let mut data = Vec::with_capacity(entries.len() * npts);
        for (m, vals) in entries {
            modes.push(m);
            data.extend(vals);
        }
        SampledSymbol {
            grid: self.grid,
            torus_dim: self.torus_dim,
            modes,
            data,
            provenance_tol: self.provenance_tol,
        }
    }

    /// Continuum partial Fourier transform on the grid (forward:
    /// `∫dx e^{−ix·ξ}`, inverse carries `(2π)^{−n}`), per hull mode.
    pub fn fourier(&self, inverse: bool) -> SampledSymbol {
        let n = self.grid.dim;
        let pts = self.grid.points;
        let _npts = self.grid.len();
        let h = self.grid.spacing();
        let dual = self.grid.dual();
        let big_l = self.grid.half_width;
        let lambda = dual.half_width;

        // Per axis: forward F_k = h e^{−iLΛ} (−1)^k DFT_k[(−1)^i f_i] and
        // inverse f_i = (h/2π) e^{+iLΛ} (−1)^i IDFT_i[(−1)^k F_k], with h the
        // spacing of the *input* grid; the checkerboards are the ±L offsets.
        let corner = big_l * lambda;
        let global = if inverse {
            C64::new(0.0, corner * n as f64).exp()
                * (h / (2.0 * std::f64::consts::PI)).powi(n as i32)
        } else {
            C64::new(0.0, -corner * n as f64).exp() * h.powi(n as i32)
        };

        let mut out_data = Vec::with_capacity(self.data.len());
        for mi in 0..self.modes.len() {
            let mut buf: Vec<C64> = self.mode_slice(mi).to_vec();
            // checkerboard in, FFT, checkerboard out — per axis the signs
            // multiply into (−1)^{Σ i_axis} on both sides.
            for (flat, v) in buf.iter_mut().enumerate() {
                if index_parity(flat, n, pts) {
                    *v = -*v;
                }
            }
            fft_nd(&mut buf, n, pts, inverse);
            for (flat, v) in buf.iter_mut().enumerate() {
                if index_parity(flat, n, pts) {
                    *v = -*v;
                }
            }
            for v in buf.iter_mut() {
                *v *= global;
            }
            out_data.extend(buf);
        }
        SampledSymbol {
            grid: dual,
            torus_dim: self.torus_dim,
            modes: self.modes.clone(),
            data: out_data,
            provenance_tol: self.provenance_tol,
        }
    }

    /// Quadrature ℓ²-norm on the grid, `(h^n Σ|f|²)^{1/2}`, summed over
    /// hull modes (Parseval reference).
    pub fn grid_l2(&self) -> f64 {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.weight()).sqrt()
    }
}

fn index_parity(flat: usize, dim: usize, pts: usize) -> bool {
    let mut f = flat;
    let mut parity = 0usize;
    for _ in 0..dim {
        parity += f % pts;
        f /= pts;
    }
    parity % 2 == 1
}

/// Separable cubic Lagrange interpolation with zero extension.
pub fn interpolate(values: &[C64], grid: &GridSpec, x: &[f64]) -> C64 {
    let n = grid.dim;
    let pts = grid.points;
    let h = grid.spacing();
    // per-axis integer base and weights
    let mut bases = Vec::with_capacity(n);
    let mut weights: Vec<[f64; 4]> = Vec::with_capacity(n);
    for axis in 0..n {
        let t = (x[axis] + grid.half_width) / h;
        let i0 = t.floor() as isize;
        let f = t - i0 as f64;
        // Lagrange basis through nodes −1, 0, 1, 2
        let w = [
            -f * (f - 1.0) * (f - 2.0) / 6.0,
            (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
            -(f + 1.0) * f * (f - 2.0) / 2.0,
            (f + 1.0) * f * (f - 1.0) / 6.0,
        ];
        bases.push(i0 - 1);
        weights.push(w);
    }
    // gather 4^n neighbors
    let mut acc = C64::new(0.0, 0.0);
    let corners = 4usize.pow(n as u32);
    for corner in 0..corners {
        let mut flat = 0isize;
        let mut w = 1.0;
        let mut valid = true;
        let mut c = corner;
        for axis in 0..n {
            let off = c % 4;
            c /= 4;
            let i = bases[axis] + off as isize;
            if i < 0 || i >= pts as isize {
                valid = false;
                break;
            }
            w *= weights[axis][off];
            flat = flat * pts as isize + i;
        }
        if valid && w != 0.0 {
            acc += values[flat as usize] * w;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_dual_roundtrip() {
        let g = GridSpec::new(8.0, 64, 1, Realization::Position).unwrap();
        let d = g.dual();
        assert_eq!(d.realization, Realization::Momentum);
        assert!((d.half_width - 64.0 * std::f64::consts::PI / 16.0).abs() < 1e-12);
        let back = d.dual();
        assert!((back.half_width - g.half_width).abs() < 1e-12);
    }

    #[test]
    fn grid_spec_rejects_non_power_of_two() {
        assert!(GridSpec::new(8.0, 48, 1, Realization::Position).is_err());
        assert!(GridSpec::new(-1.0, 64, 1, Realization::Position).is_err());
    }

    #[test]
    fn fourier_gaussian_on_grid() {
        // e^{−x²/2} → √(2π) e^{−ξ²/2} with rel. error ≤ 1e−8 for L = 8.
        let grid = GridSpec::new(8.0, 64, 1, Realization::Position).unwrap();
        let data: Vec<C64> = (0..64)
            .map(|i| {
                let x = grid.coord(i);
                C64::new((-x * x / 2.0).exp(), 0.0)
            })
            .collect();
        let s = SampledSymbol::new(grid, 1, vec![vec![]], data, 0.0).unwrap();
        let f = s.fourier(false);
        let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
        for k in 0..64 {
            let xi = f.grid.coord(k);
            let want = sqrt_2pi * (-xi * xi / 2.0).exp();
            let got = f.mode_slice(0)[k];
            assert!(
                (got - C64::new(want, 0.0)).norm() <= 1e-8 * sqrt_2pi,
                "ξ={xi}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn fourier_roundtrip_identity() {
        let grid = GridSpec::new(8.0, 64, 1, Realization::Position).unwrap();
        let data: Vec<C64> = (0..64)
            .map(|i| {
                let x = grid.coord(i);
                C64::new((-x * x / 2.0).exp() * (1.0 + 0.3 * x), 0.2 * (-x * x).exp())
            })
            .collect();
        let s = SampledSymbol::new(grid, 1, vec![vec![]], data.clone(), 0.0).unwrap();
        let back = s.fourier(false).fourier(true);
        for (a, b) in back.mode_slice(0).iter().zip(&data) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn fourier_shift_theorem() {
        // transform of e^{ixξ₀} g is the translate by ξ₀ of transform of g
        let grid = GridSpec::new(8.0, 64, 1, Realization::Position).unwrap();
        let xi0 = f64::from(8) * std::f64::consts::PI / 16.0 / 4.0; // on the dual lattice
        let g: Vec<C64> = (0..64)
            .map(|i| {
                let x = grid.coord(i);
                C64::new((-x * x / 2.0).exp(), 0.0)
            })
            .collect();
        let modulated: Vec<C64> = (0..64)
            .map(|i| {
                let x = grid.coord(i);
                C64::new(0.0, x * xi0).exp() * (-x * x / 2.0).exp()
            })
            .collect();
        let fg = SampledSymbol::new(grid, 1, vec![vec![]], g, 0.0)
            .unwrap()
            .fourier(false);
        let fm = SampledSymbol::new(grid, 1, vec![vec![]], modulated, 0.0)
            .unwrap()
            .fourier(false);
        // compare fm(ξ) with fg(ξ − ξ0) on interior points
        let shift = (xi0 / fg.grid.spacing()).round() as usize;
        for k in shift..64 {
            let a = fm.mode_slice(0)[k];
            let b = fg.mode_slice(0)[k - shift];
            assert!((a - b).norm() < 1e-9, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn parseval_on_grid() {
        let grid = GridSpec::new(8.0, 64, 1, Realization::Position).unwrap();
        let data: Vec<C64> = (0..64)
            .map(|i| {
                let x = grid.coord(i);
                C64::new((-x * x / 2.0).exp(), 0.1 * (-x * x / 3.0).exp())
            })
            .collect();
        let s = SampledSymbol::new(grid, 1, vec![vec![]], data, 0.0).unwrap();
        let f = s.fourier(false);
        // ‖F‖₂² = 2π ‖f‖₂² under this convention
        let lhs = f.grid_l2().powi(2);
        let rhs = 2.0 * std::f64::consts::PI * s.grid_l2().powi(2);
        assert!((lhs - rhs).abs() < 1e-10 * rhs);
    }

    #[test]
    fn interpolation_order() {
        // sample a smooth function, interpolate off-grid, halve h, expect
        // error to drop by ≈ 2⁴
        let f = |x: f64| (-x * x / 2.0).exp() * (1.0 + 0.5 * x);
        let make = |npts: usize| {
            let grid = GridSpec::new(8.0, npts, 1, Realization::Position).unwrap();
            let data: Vec<C64> = (0..npts).map(|i| C64::new(f(grid.coord(i)), 0.0)).collect();
            SampledSymbol::new(grid, 1, vec![vec![]], data, 0.0).unwrap()
        };
        let coarse = make(128);
        let fine = make(256);
        let xs: Vec<f64> = (0..40).map(|i| -6.0 + 0.31 * i as f64).collect();
        let err = |s: &SampledSymbol| {
            xs.iter()
                .map(|&x| {
                    (interpolate(s.mode_slice(0), &s.grid, &[x]) - C64::new(f(x), 0.0)).norm()
                })
                .fold(0.0, f64::max)
        };
        let e1 = err(&coarse);
        let e2 = err(&fine);
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "observed interpolation order {order}");
    }

    #[test]
    fn involution_is_an_involution() {
        let grid = GridSpec::new(4.0, 16, 1, Realization::Position).unwrap();
        let data: Vec<C64> = (0..16)
            .map(|i| {
                let x = grid.coord(i);
                C64::new((-x * x).exp(), 0.3 * x * (-x * x).exp())
            })
            .collect();
        let s = SampledSymbol::new(grid, 1, vec![vec![1]], data, 0.0).unwrap();
        let back = s.involution().involution();
        assert_eq!(back.modes(), s.modes());
        for (a, b) in back.mode_slice(0).iter().zip(s.mode_slice(0)) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
