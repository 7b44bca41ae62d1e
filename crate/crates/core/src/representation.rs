//! Covariant Hilbert-space representations on a grid of `L²(X)`.
//!
//! The integrated form acts through the kernel
//!
//! ```text
//! [Rep_ω^ħ(Φ)u](x) = ħ^{−n} ∫dy Φ(θ_{(x+y)/2}[ω]; (y−x)/ħ) e^{−(i/ħ)Γ^{B_ω}⟨0,x,y⟩} u(y)
//! ```
//!
//! discretized with the rectangle weight `h^n` folded into the matrix.  The
//! pseudodifferential form comes either through the inverse partial Fourier
//! transform of the symbol (the defining route) or by direct ξ-quadrature;
//! the two must agree — that test pins the Fourier sign convention of the
//! whole crate.
//!
//! Boundary policy: compactly truncated kernels leak at the box edge, so
//! every defect metric is evaluated on the innermost 75% block per axis.

use rayon::prelude::*;

use crate::algebra::l1_norm;
use crate::error::{Error, Result};
use crate::flux::moments::triangle_moment;
use crate::flux::MagneticField;
use crate::hull::{HullFunction, HullModel, HullPoint};
use crate::numerics::{spectral_norm, unflatten};
use crate::symbols::{GridSpec, Realization, Symbol};
use crate::C64;

/// Dense discretized kernel on the grid, quadrature weight included.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub grid: GridSpec,
    pub hbar: f64,
    pub omega: HullPoint,
    /// Row-major `dim×dim`, `dim = grid.len()`.
    pub entries: Vec<C64>,
    pub provenance_tol: f64,
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn zero(grid: GridSpec, hbar: f64, omega: HullPoint) -> Self {
        let dim = grid.len();
        KernelMatrix {
            grid,
            hbar,
            omega,
            entries: vec![C64::new(0.0, 0.0); dim * dim],
            provenance_tol: 0.0,
        }
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        let dim = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); dim];
        crate::numerics::matvec(&self.entries, dim, u, &mut out);
        out
    }

    pub fn matmul(&self, other: &KernelMatrix) -> KernelMatrix {
        let dim = self.dim();
        assert_eq!(dim, other.dim());
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        entries
            .par_chunks_mut(dim)
            .enumerate()
            .for_each(|(i, row)| {
                for k in 0..dim {
                    let a = self.entries[i * dim + k];
                    if a == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let brow = &other.entries[k * dim..(k + 1) * dim];
                    for (r, b) in row.iter_mut().zip(brow) {
                        *r += a * b;
                    }
                }
            });
        KernelMatrix {
            grid: self.grid,
            hbar: self.hbar,
            omega: self.omega.clone(),
            entries,
            provenance_tol: self.provenance_tol + other.provenance_tol,
        }
    }

    pub fn adjoint(&self) -> KernelMatrix {
        let dim = self.dim();
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                entries[j * dim + i] = self.entries[i * dim + j].conj();
            }
        }
        KernelMatrix {
            grid: self.grid,
            hbar: self.hbar,
            omega: self.omega.clone(),
            entries,
            provenance_tol: self.provenance_tol,
        }
    }

    pub fn sub(&self, other: &KernelMatrix) -> KernelMatrix {
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            *a -= b;
        }
        out.provenance_tol += other.provenance_tol;
        out
    }

    /// Largest singular value (power iteration, deterministic).
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.entries, self.dim())
    }

    /// Restriction to the innermost `fraction` of indices per axis.
    pub fn interior_block(&self, fraction: f64) -> (Vec<C64>, usize) {
        let n = self.grid.dim;
        let pts = self.grid.points;
        let margin = ((1.0 - fraction) * 0.5 * pts as f64).ceil() as usize;
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&flat| {
                unflatten(flat, n, pts)
                    .iter()
                    .all(|&i| i >= margin && i < pts - margin)
            })
            .collect();
        let m = keep.len();
        let mut block = vec![C64::new(0.0, 0.0); m * m];
        for (bi, &i) in keep.iter().enumerate() {
            for (bj, &j) in keep.iter().enumerate() {
                block[bi * m + bj] = self.entries[i * self.dim() + j];
            }
        }
        (block, m)
    }

    pub fn interior_spectral_norm(&self, fraction: f64) -> f64 {
        let (block, m) = self.interior_block(fraction);
        spectral_norm(&block, m)
    }

    /// `‖M − M†‖ / ‖M‖` (full block).
    pub fn hermiticity_defect(&self) -> f64 {
        let diff = self.sub(&self.adjoint());
        let scale = self.spectral_norm();
        if scale == 0.0 {
            0.0
        } else {
            diff.spectral_norm() / scale
        }
    }
}

/// Default interior fraction for defect metrics.
pub const INTERIOR_FRACTION: f64 = 0.75;

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar <= 1.0) {
        Err(Error::invalid(format!("ħ must lie in (0,1], got {hbar}")))
    } else {
        Ok(())
    }
}

/// Flux phases `e^{−(i/ħ)Γ^{B_ω}⟨0,x_i,x_j⟩}` for every matrix entry.
fn flux_phases(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    grid: &GridSpec,
) -> Vec<C64> {
    let dim = grid.len();
    let coords: Vec<Vec<f64>> = (0..dim).map(|f| grid.point(f)).collect();
    // per field mode: phase factor e^{iκ·ω} fixed at this ω
    struct FM {
        freq: Vec<f64>,
        at_omega: C64,
        pairs: Vec<(usize, usize, C64)>,
    }
    let mut fmodes: Vec<FM> = Vec::new();
    for (&(j, k), func) in field.upper_components() {
        for (m, c) in func.modes() {
            let phase: f64 = m
                .iter()
                .zip(omega.angles())
                .map(|(&mi, &wi)| f64::from(mi) * wi)
                .sum();
            fmodes.push(FM {
                freq: model.mode_frequency(m),
                at_omega: C64::new(0.0, phase).exp(),
                pairs: vec![(j, k, *c)],
            });
        }
    }
    (0..dim * dim)
        .into_par_iter()
        .map(|e| {
            let i = e / dim;
            let j = e % dim;
            let xi = &coords[i];
            let xj = &coords[j];
            // Γ⟨0, x_i, x_j⟩ with x = x_i, y = x_j − x_i
            let mut flux = 0.0;
            for fm in &fmodes {
                let alpha: f64 = fm.freq.iter().zip(xi).map(|(f, v)| f * v).sum();
                let beta: f64 = fm
                    .freq
                    .iter()
                    .zip(xj.iter().zip(xi).map(|(a, b)| a - b))
                    .map(|(f, v)| f * v)
                    .sum();
                let kernel = triangle_moment(0, 0, beta, alpha);
                for &(pj, pk, c) in &fm.pairs {
                    let y: Vec<f64> = xj.iter().zip(xi).map(|(a, b)| a - b).collect();
                    let combined = xi[pj] * y[pk] - xi[pk] * y[pj];
                    flux += (c * combined * kernel * fm.at_omega).re;
                }
            }
            C64::new(0.0, -flux / hbar).exp()
        })
        .collect()
}

/// `Rep_ω^ħ(Φ)` as a kernel matrix.
pub fn rep_matrix(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    phi: &Symbol,
    grid: &GridSpec,
) -> Result<KernelMatrix> {
    check_hbar(hbar)?;
    if phi.realization != Realization::Position {
        return Err(Error::invalid("rep_matrix takes an X-realization symbol"));
    }
    let n = grid.dim;
    let dim = grid.len();
    let coords: Vec<Vec<f64>> = (0..dim).map(|f| grid.point(f)).collect();
    let phases = flux_phases(model, field, hbar, omega, grid);
    let scale = grid.weight() / hbar.powi(n as i32);

    let entries: Vec<C64> = (0..dim * dim)
        .into_par_iter()
        .map(|e| {
            let i = e / dim;
            let j = e % dim;
            let xi = &coords[i];
            let xj = &coords[j];
            let mid: Vec<f64> = xi.iter().zip(xj).map(|(a, b)| 0.5 * (a + b)).collect();
            let arg: Vec<f64> = xj.iter().zip(xi).map(|(a, b)| (a - b) / hbar).collect();
            let w = model.act(omega, &mid).expect("dims checked");
            phi.evaluate(&w, &arg) * phases[e] * scale
        })
        .collect();

    // off-lattice evaluation of sampled symbols inflates the tolerance
    let mut tol = phi.provenance_tol();
    if phi.sampled().is_some() {
        let ratio = 1.0 / hbar;
        if (ratio - ratio.round()).abs() > 1e-9 {
            tol += grid.spacing().powi(4);
        }
    }
    Ok(KernelMatrix {
        grid: *grid,
        hbar,
        omega: omega.clone(),
        entries,
        provenance_tol: tol,
    })
}

/// `Op_ω^ħ(f)` through the defining route `Rep_ω^ħ((1⊗F)^{-1} f)`.
pub fn op_matrix(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    f: &Symbol,
    grid: &GridSpec,
) -> Result<KernelMatrix> {
    if f.realization != Realization::Momentum {
        return Err(Error::invalid("op_matrix takes an X*-realization symbol"));
    }
    let phi = f.inverse_partial_fourier()?;
    // the inverse transform of a sampled symbol lives on the dual grid;
    // rep_matrix resamples transparently through Symbol::evaluate
    rep_matrix(model, field, hbar, omega, &phi, grid)
}

/// `Op_ω^ħ(f)` by direct ξ-quadrature of the pseudodifferential kernel
/// (the convention-locking second route).
pub fn op_matrix_direct(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    f: &Symbol,
    grid: &GridSpec,
) -> Result<KernelMatrix> {
    check_hbar(hbar)?;
    if f.realization != Realization::Momentum {
        return Err(Error::invalid(
            "op_matrix_direct takes an X*-realization symbol",
        ));
    }
    let n = grid.dim;
    let dim = grid.len();
    let pts = grid.points;
    let h = grid.spacing();
    // The ξ rule must resolve e^{i·diff·ξ/ħ} with |diff| up to the box
    // width 2L: the periodization period 2πħ/hξ must exceed 4L, i.e. the
    // dual grid is refined to 2N/ħ nodes per axis (same ξ-box).
    let refine = (1.0 / hbar).ceil() as usize;
    let base_dual = grid.dual();
    let xigrid = GridSpec::new(
        base_dual.half_width,
        (2 * pts * refine).next_power_of_two(),
        n,
        Realization::Momentum,
    )?;
    let nxi = xigrid.len();
    let coords: Vec<Vec<f64>> = (0..dim).map(|fl| grid.point(fl)).collect();
    let xis: Vec<Vec<f64>> = (0..nxi).map(|fl| xigrid.point(fl)).collect();

    // ξ-sums per hull mode and difference vector:
    // T_m(diff) = hξ^n Σ_ξ e^{i diff·ξ/ħ} f_m(ξ)
    let fs = f.sample(&xigrid)?;
    let diffs = 2 * pts - 1;
    let ndiffs = diffs.pow(n as u32);
    let diff_coord = |i: usize| (i as isize - (pts as isize - 1)) as f64 * h;
    let nmodes = fs.modes().len();
    let xw = xigrid.weight();
    let tmats: Vec<Vec<C64>> = (0..nmodes)
        .into_par_iter()
        .map(|mi| {
            let vals = fs.mode_slice(mi);
            (0..ndiffs)
                .map(|dflat| {
                    let didx = unflatten(dflat, n, diffs);
                    let d: Vec<f64> = didx.iter().map(|&i| diff_coord(i)).collect();
                    let mut acc = C64::new(0.0, 0.0);
                    for (xi, v) in xis.iter().zip(vals) {
                        let dot: f64 = d.iter().zip(xi).map(|(a, b)| a * b).sum();
                        acc += v * C64::new(0.0, dot / hbar).exp();
                    }
                    acc * xw
                })
                .collect()
        })
        .collect();

    let phases = flux_phases(model, field, hbar, omega, grid);
    let scale = grid.weight() / (2.0 * std::f64::consts::PI * hbar).powi(n as i32);
    let modes = fs.modes().to_vec();
    let entries: Vec<C64> = (0..dim * dim)
        .into_par_iter()
        .map(|e| {
            let i = e / dim;
            let j = e % dim;
            let xi_idx = unflatten(i, n, pts);
            let xj_idx = unflatten(j, n, pts);
            let mut dflat = 0usize;
            for axis in 0..n {
                dflat = dflat * diffs + (xj_idx[axis] + (pts - 1) - xi_idx[axis]);
            }
            let mid: Vec<f64> = coords[i]
                .iter()
                .zip(&coords[j])
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let w = model.act(omega, &mid).expect("dims checked");
            let mut val = C64::new(0.0, 0.0);
            for (mi, m) in modes.iter().enumerate() {
                let p: f64 = m
                    .iter()
                    .zip(w.angles())
                    .map(|(&a, &b)| f64::from(a) * b)
                    .sum();
                val += tmats[mi][dflat] * C64::new(0.0, p).exp();
            }
            val * phases[e] * scale
        })
        .collect();

    Ok(KernelMatrix {
        grid: *grid,
        hbar,
        omega: omega.clone(),
        entries,
        provenance_tol: fs.provenance_tol,
    })
}

/// Multiplication operator `r_ω(φ) = diag(φ(θ_{x_i}[ω]))`.
pub fn multiplication_matrix(
    model: &HullModel,
    phi: &HullFunction,
    omega: &HullPoint,
    grid: &GridSpec,
) -> Result<KernelMatrix> {
    let dim = grid.len();
    let mut m = KernelMatrix::zero(*grid, 1.0, omega.clone());
    for i in 0..dim {
        let x = grid.point(i);
        let w = model.act(omega, &x)?;
        m.entries[i * dim + i] = phi.evaluate(&w);
    }
    Ok(m)
}

/// Twisted translation `T_ω^ħ(y)` for `ħy = steps·h` on the lattice:
/// `[T u](x) = e^{−(i/ħ)Γ^{B_ω}⟨0,x,x+ħy⟩} u(x + ħy)`, zero-filled.
pub fn twisted_translation(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    steps: &[i64],
    grid: &GridSpec,
) -> Result<KernelMatrix> {
    check_hbar(hbar)?;
    let n = grid.dim;
    let pts = grid.points;
    let dim = grid.len();
    let h = grid.spacing();
    let shift: Vec<f64> = steps.iter().map(|&s| s as f64 * h).collect();
    let zero = vec![0.0; n];
    // flux series Γ^{B_ω}⟨0, x, x+ħy⟩ as a function of the base point x:
    // evaluate per row through the translation-covariant closed form
    let mut m = KernelMatrix::zero(*grid, hbar, omega.clone());
    for i in 0..dim {
        let idx = unflatten(i, n, pts);
        let mut ok = true;
        let mut jflat = 0usize;
        for axis in 0..n {
            let t = idx[axis] as i64 + steps[axis];
            if t < 0 || t >= pts as i64 {
                ok = false;
                break;
            }
            jflat = jflat * pts + t as usize;
        }
        if !ok {
            continue;
        }
        let x = grid.point(i);
        let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let flux = crate::flux::triangle_flux(model, field, &zero, &x, &xs)?.at(omega);
        m.entries[i * dim + jflat] = C64::new(0.0, -flux / hbar).exp();
    }
    Ok(m)
}

/// Def-7 covariance defects for one pair of lattice shifts and one hull
/// function: (ii) `T(x)T(y) = r[κ^{B,ħ}(x,y)]T(x+y)` and (iii)
/// `T(x)r(φ)T(x)* = r[θ_x^ħ(φ)]` in interior operator norm.
pub struct CovarianceDefects {
    pub composition: f64,
    pub conjugation: f64,
}

pub fn covariance_check(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    steps_x: &[i64],
    steps_y: &[i64],
    phi: &HullFunction,
    grid: &GridSpec,
) -> Result<CovarianceDefects> {
    let h = grid.spacing();
    let tx = twisted_translation(model, field, hbar, omega, steps_x, grid)?;
    let ty = twisted_translation(model, field, hbar, omega, steps_y, grid)?;
    let steps_xy: Vec<i64> = steps_x.iter().zip(steps_y).map(|(a, b)| a + b).collect();
    let txy = twisted_translation(model, field, hbar, omega, &steps_xy, grid)?;

    // κ^{B,ħ}(·; x, y) as a hull function, evaluated along the orbit diag
    let x_vec: Vec<f64> = steps_x.iter().map(|&s| s as f64 * h / hbar).collect();
    let y_vec: Vec<f64> = steps_y.iter().map(|&s| s as f64 * h / hbar).collect();
    let zero = vec![0.0; grid.dim];
    let hx: Vec<f64> = x_vec.iter().map(|v| v * hbar).collect();
    let hxy: Vec<f64> = x_vec
        .iter()
        .zip(&y_vec)
        .map(|(a, b)| (a + b) * hbar)
        .collect();
    let kappa_flux = crate::flux::triangle_flux(model, field, &zero, &hx, &hxy)?;
    let dim = grid.len();
    let mut r_kappa = KernelMatrix::zero(*grid, hbar, omega.clone());
    for i in 0..dim {
        let pt = grid.point(i);
        let w = model.act(omega, &pt)?;
        r_kappa.entries[i * dim + i] = C64::new(0.0, -kappa_flux.at(&w) / hbar).exp();
    }

    let lhs = tx.matmul(&ty);
    let rhs = r_kappa.matmul(&txy);
    let composition = lhs.sub(&rhs).interior_spectral_norm(INTERIOR_FRACTION);

    let r_phi = multiplication_matrix(model, phi, omega, grid)?;
    let shifted = phi.translate(model, &hx)?;
    let r_shifted = multiplication_matrix(model, &shifted, omega, grid)?;
    let lhs3 = tx.matmul(&r_phi).matmul(&tx.adjoint());
    let conjugation = lhs3.sub(&r_shifted).interior_spectral_norm(INTERIOR_FRACTION);

    Ok(CovarianceDefects {
        composition,
        conjugation,
    })
}

/// Relative interior-norm defect of the representation morphism property
/// `Rep(Φ ◊ℏᴮ Ψ) = Rep(Φ)·Rep(Ψ)`.
pub fn morphism_defect(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    phi: &Symbol,
    psi: &Symbol,
    omega_grid: &crate::hull::OmegaGrid,
    grid: &GridSpec,
) -> Result<f64> {
    let product = crate::algebra::compose_magnetic(model, field, hbar, phi, psi, omega_grid, grid)?;
    let mp = rep_matrix(model, field, hbar, omega, &product, grid)?;
    let ma = rep_matrix(model, field, hbar, omega, phi, grid)?;
    let mb = rep_matrix(model, field, hbar, omega, psi, grid)?;
    let prod = ma.matmul(&mb);
    let na = ma.interior_spectral_norm(INTERIOR_FRACTION);
    let nb = mb.interior_spectral_norm(INTERIOR_FRACTION);
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(mp.sub(&prod).interior_spectral_norm(INTERIOR_FRACTION) / (na * nb))
}

/// Intertwiner `U^ħ_{ω,ω'}` for `θ_{x₀}[ω'] = ω`:
/// `(U u)(x) = e^{−(i/ħ)Γ^{B_{ω'}}⟨0,x₀,x₀+x⟩} u(x + x₀)`, `x₀` on the
/// grid lattice (off-lattice shifts are an input error).
pub fn intertwiner(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega_prime: &HullPoint,
    x0: &[f64],
    grid: &GridSpec,
) -> Result<KernelMatrix> {
    check_hbar(hbar)?;
    let n = grid.dim;
    let pts = grid.points;
    let dim = grid.len();
    let h = grid.spacing();
    let steps: Vec<i64> = x0
        .iter()
        .map(|&v| {
            let s = v / h;
            if (s - s.round()).abs() > 1e-9 {
                Err(Error::invalid(format!(
                    "intertwiner shift {v} is off the grid lattice (h = {h})"
                )))
            } else {
                Ok(s.round() as i64)
            }
        })
        .collect::<Result<_>>()?;
    let zero = vec![0.0; n];
    let mut m = KernelMatrix::zero(*grid, hbar, omega_prime.clone());
    for i in 0..dim {
        let idx = unflatten(i, n, pts);
        let mut ok = true;
        let mut jflat = 0usize;
        for axis in 0..n {
            let t = idx[axis] as i64 + steps[axis];
            if t < 0 || t >= pts as i64 {
                ok = false;
                break;
            }
            jflat = jflat * pts + t as usize;
        }
        if !ok {
            continue;
        }
        let x = grid.point(i);
        let x0x: Vec<f64> = x0.iter().zip(&x).map(|(a, b)| a + b).collect();
        let flux = crate::flux::triangle_flux(model, field, &zero, x0, &x0x)?.at(omega_prime);
        m.entries[i * dim + jflat] = C64::new(0.0, -flux / hbar).exp();
    }
    Ok(m)
}

/// Relative interior defect of the equivariance condition
/// `H_{θ_x[ω]}^ħ = (U^ħ_{ω,θ_x[ω]})^{-1} H_ω^ħ U^ħ_{ω,θ_x[ω]}`.
pub fn equivariance_defect(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    x: &[f64],
    f: &Symbol,
    grid: &GridSpec,
) -> Result<f64> {
    let omega_x = model.act(omega, x)?;
    let h_at_x = op_matrix(model, field, hbar, &omega_x, f, grid)?;
    let h_at_omega = op_matrix(model, field, hbar, omega, f, grid)?;
    // U = U_{ω, θ_x[ω]}: x₀ with θ_{x₀}[θ_x ω] = ω, i.e. x₀ = −x.
    let minus_x: Vec<f64> = x.iter().map(|v| -v).collect();
    let u = intertwiner(model, field, hbar, &omega_x, &minus_x, grid)?;
    let conj = u.adjoint().matmul(&h_at_omega).matmul(&u);
    let scale = h_at_omega.interior_spectral_norm(INTERIOR_FRACTION);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(h_at_x.sub(&conj).interior_spectral_norm(INTERIOR_FRACTION) / scale)
}

/// Regular-representation norm estimate: the spectral lower bound from a
/// finite set of fibers and the L¹ upper bound.
#[derive(Debug, Clone)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
}

pub fn norm_estimate(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    phi: &Symbol,
    omega_samples: &[HullPoint],
    grid: &GridSpec,
) -> Result<NormEstimate> {
    if omega_samples.is_empty() {
        return Err(Error::invalid("norm estimate needs ω samples"));
    }
    let mut lower = 0.0_f64;
    for w in omega_samples {
        let m = rep_matrix_periodized(model, field, hbar, w, phi, grid)?;
        lower = lower.max(m.spectral_norm());
    }
    Ok(NormEstimate {
        lower,
        upper: l1_norm(phi)?,
    })
}

/// Periodized kernel for norm estimation: displacements wrap on the torus
/// of circumference `2L`, which removes the zero-fill edge deficit of the
/// boxed kernel (for B = 0 and ω-independent symbols the matrix becomes
/// circulant and its norm is the discrete multiplier sup, exactly
/// ħ-independent).  The row-sum bound keeps the estimate below the L¹
/// upper bracket regardless of the flux phases.
fn rep_matrix_periodized(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    omega: &HullPoint,
    phi: &Symbol,
    grid: &GridSpec,
) -> Result<KernelMatrix> {
    check_hbar(hbar)?;
    if phi.realization != Realization::Position {
        return Err(Error::invalid("rep_matrix takes an X-realization symbol"));
    }
    let n = grid.dim;
    let pts = grid.points;
    let dim = grid.len();
    let h = grid.spacing();
    let big_l = grid.half_width;
    let coords: Vec<Vec<f64>> = (0..dim).map(|f| grid.point(f)).collect();
    let scale = grid.weight() / hbar.powi(n as i32);
    let zero = vec![0.0; n];
    let entries: Vec<C64> = (0..dim * dim)
        .into_par_iter()
        .map(|e| {
            let i = e / dim;
            let j = e % dim;
            let xi = &coords[i];
            let xj = &coords[j];
            // displacement wrapped to [−L, L)
            let wrapped: Vec<f64> = xj
                .iter()
                .zip(xi)
                .map(|(a, b)| {
                    let d = a - b;
                    d - (2.0 * big_l) * ((d + big_l) / (2.0 * big_l)).floor()
                })
                .collect();
            let y: Vec<f64> = xi.iter().zip(&wrapped).map(|(a, b)| a + b).collect();
            let mid: Vec<f64> = xi.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let arg: Vec<f64> = wrapped.iter().map(|d| d / hbar).collect();
            let w = model.act(omega, &mid).expect("dims checked");
            let flux = crate::flux::triangle_flux(model, field, &zero, xi, &y)
                .expect("dims checked")
                .at(omega);
            phi.evaluate(&w, &arg) * C64::new(0.0, -flux / hbar).exp() * scale
        })
        .collect();
    let _ = (h, pts);
    Ok(KernelMatrix {
        grid: *grid,
        hbar,
        omega: omega.clone(),
        entries,
        provenance_tol: phi.provenance_tol(),
    })
}
