//! The product layer: untwisted convolution ◊₀, the magnetic twisted
//! product ◊ℏᴮ, the magnetic Moyal product ♯ℏᴮ (computed only through the
//! partial Fourier conjugation — never through the oscillatory quadruple
//! integral), Poisson brackets in both realizations, the π_ω Poisson
//! morphisms, the semiclassical expansion remainder, and the L¹ norm
//! surrogate.
//!
//! Twisted product quadrature, for each (ω, x) on the output grids:
//!
//! ```text
//! (Φ ◊ℏᴮ Ψ)(ω; x) = h^n Σ_y Φ(θ_{(ħ/2)(y−x)}[ω]; y) Ψ(θ_{(ħ/2)y}[ω]; x−y) e^{−iħΛ_ħᴮ(x,y)(ω)}
//! ```
//!
//! with exactly evaluated translated factors (mode phases) and the cocycle
//! phase from the closed-form scaled flux.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::moments::triangle_moment;
use crate::flux::MagneticField;
use crate::hull::{HullModel, HullPoint, Mode, OmegaGrid};
use crate::numerics::{fft_nd, unflatten};
use crate::symbols::{GridSpec, Realization, SampledSymbol, Symbol};
use crate::C64;

/// Relative mode-pruning threshold for product outputs.
const MODE_PRUNE: f64 = 1e-14;

fn require_position(s: &Symbol, what: &str) -> Result<()> {
    if s.realization != Realization::Position {
        return Err(Error::invalid(format!(
            "{what} requires the X-realization (Position)"
        )));
    }
    Ok(())
}

fn require_momentum(s: &Symbol, what: &str) -> Result<()> {
    if s.realization != Realization::Momentum {
        return Err(Error::invalid(format!(
            "{what} requires the X*-realization (Momentum)"
        )));
    }
    Ok(())
}

/// Grid both operands can share: an explicit sampled grid wins, otherwise
/// the merged default box of the atom sums.
pub fn common_grid(phi: &Symbol, psi: &Symbol) -> Result<GridSpec> {
    match (phi.sampled(), psi.sampled()) {
        (Some(a), _) => Ok(a.grid),
        (None, Some(b)) => Ok(b.grid),
        (None, None) => {
            let ga = phi.default_grid()?;
            let gb = psi.default_grid()?;
            GridSpec::new(
                ga.half_width.max(gb.half_width),
                ga.points.max(gb.points),
                ga.dim,
                phi.realization,
            )
        }
    }
}

/// Untwisted fibered convolution (Eq.-(5) style): pointwise in ω, FFT
/// linear convolution in x, per hull-mode pair.
pub fn compose_zero(phi: &Symbol, psi: &Symbol) -> Result<Symbol> {
    let grid = common_grid(phi, psi)?;
    compose_zero_on(phi, psi, &grid)
}

pub fn compose_zero_on(phi: &Symbol, psi: &Symbol, grid: &GridSpec) -> Result<Symbol> {
    require_position(phi, "compose_zero")?;
    require_position(psi, "compose_zero")?;
    let a = phi.sample(grid)?;
    let b = psi.sample(grid)?;
    let out = convolve_mode_tables(&a, &b)?;
    Ok(Symbol::from_sampled(out))
}

fn convolve_mode_tables(a: &SampledSymbol, b: &SampledSymbol) -> Result<SampledSymbol> {
    let grid = a.grid;
    let n = grid.dim;
    let pts = grid.points;
    let padded = 2 * pts;
    let pad_len = padded.pow(n as u32);
    let npts = grid.len();

    let pad = |src: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); pad_len];
        for flat in 0..npts {
            let idx = unflatten(flat, n, pts);
            let mut pflat = 0usize;
            for &i in &idx {
                pflat = pflat * padded + i;
            }
            out[pflat] = src[flat];
        }
        out
    };

    // FFT of every mode table once.
    let fft_of = |s: &SampledSymbol| -> Vec<Vec<C64>> {
        (0..s.modes().len())
            .map(|mi| {
                let mut buf = pad(s.mode_slice(mi));
                fft_nd(&mut buf, n, padded, false);
                buf
            })
            .collect()
    };
    let fa = fft_of(a);
    let fb = fft_of(b);

    // Accumulate products per result mode in frequency space.
    use std::collections::BTreeMap;
    let mut freq_acc: BTreeMap<Mode, Vec<C64>> = BTreeMap::new();
    for (mi, m1) in a.modes().iter().enumerate() {
        for (mj, m2) in b.modes().iter().enumerate() {
            let m: Mode = m1.iter().zip(m2).map(|(p, q)| p + q).collect();
            let slot = freq_acc
                .entry(m)
                .or_insert_with(|| vec![C64::new(0.0, 0.0); pad_len]);
            for ((s, p), q) in slot.iter_mut().zip(&fa[mi]).zip(&fb[mj]) {
                *s += p * q;
            }
        }
    }

    // One inverse FFT per result mode; extract the centered box and apply
    // the quadrature weight.
    let weight = grid.weight() / pad_len as f64;
    let mut modes = Vec::with_capacity(freq_acc.len());
    let mut data = Vec::with_capacity(freq_acc.len() * npts);
    for (m, mut freq) in freq_acc {
        fft_nd(&mut freq, n, padded, true);
        modes.push(m);
        for flat in 0..npts {
            let idx = unflatten(flat, n, pts);
            let mut pflat = 0usize;
            for &i in &idx {
                pflat = pflat * padded + (i + pts / 2);
            }
            data.push(freq[pflat] * weight);
        }
    }

    let tol = a.provenance_tol + b.provenance_tol + boundary_tail(a) + boundary_tail(b);
    let mut out = SampledSymbol::new(grid, a.torus_dim(), modes, data, tol)?;
    out.prune_modes(MODE_PRUNE);
    Ok(out)
}

/// Mass on the outermost grid shell — the box-truncation part of a
/// product's error budget.
fn boundary_tail(s: &SampledSymbol) -> f64 {
    let n = s.grid.dim;
    let pts = s.grid.points;
    let mut tail = 0.0;
    for flat in 0..s.grid.len() {
        let idx = unflatten(flat, n, pts);
        if idx.iter().any(|&i| i == 0 || i == pts - 1) {
            let v: f64 = (0..s.modes().len())
                .map(|mi| s.mode_slice(mi)[flat].norm())
                .sum();
            tail += v;
        }
    }
    tail * s.grid.weight()
}

/// The magnetic twisted product on ωgrid × grid.
pub fn compose_magnetic(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    phi: &Symbol,
    psi: &Symbol,
    omega_grid: &OmegaGrid,
    grid: &GridSpec,
) -> Result<Symbol> {
    if !(hbar > 0.0 && hbar <= 1.0) {
        return Err(Error::invalid(format!("ħ must lie in (0,1], got {hbar}")));
    }
    require_position(phi, "compose_magnetic")?;
    require_position(psi, "compose_magnetic")?;
    let a = phi.sample(grid)?;
    let b = psi.sample(grid)?;
    let d = a.torus_dim();
    let n = grid.dim;
    let pts = grid.points;
    let npts = grid.len();
    let g = omega_grid.points_per_axis;
    let omega_pts = omega_grid.points();
    let nomega = omega_pts.len();

    // Frequency vectors of the hull modes.
    let fa: Vec<Vec<f64>> = a.modes().iter().map(|m| model.mode_frequency(m)).collect();
    let fb: Vec<Vec<f64>> = b.modes().iter().map(|m| model.mode_frequency(m)).collect();

    // Distinct field modes with per-component coefficients.
    struct FieldMode {
        freq: Vec<f64>,
        // (j, k, coefficient) of the stored upper components carrying this mode
        pairs: Vec<(usize, usize, C64)>,
    }
    let mut bmodes: Vec<(Mode, FieldMode)> = Vec::new();
    for (&(j, k), func) in field.upper_components() {
        for (m, c) in func.modes() {
            match bmodes.iter_mut().find(|(mm, _)| mm == m) {
                Some((_, fm)) => fm.pairs.push((j, k, *c)),
                None => bmodes.push((
                    m.clone(),
                    FieldMode {
                        freq: model.mode_frequency(m),
                        pairs: vec![(j, k, *c)],
                    },
                )),
            }
        }
    }

    // Translation phase tables: e^{i(ħ/2) f_m·(y−x)} over difference
    // vectors, e^{i(ħ/2) f_m·y} over grid points.
    let h = grid.spacing();
    let diffs = 2 * pts - 1;
    let ndiffs = diffs.pow(n as u32);
    let diff_coord = |i: usize| (i as isize - (pts as isize - 1)) as f64 * h;
    let diffphase: Vec<Vec<C64>> = fa
        .iter()
        .map(|fm| {
            (0..ndiffs)
                .map(|flat| {
                    let idx = unflatten(flat, n, diffs);
                    let dot: f64 = idx.iter().zip(fm).map(|(&i, f)| diff_coord(i) * f).sum();
                    C64::new(0.0, 0.5 * hbar * dot).exp()
                })
                .collect()
        })
        .collect();
    let transphase: Vec<Vec<C64>> = fb
        .iter()
        .map(|fm| {
            (0..npts)
                .map(|flat| {
                    let y = grid.point(flat);
                    let dot: f64 = y.iter().zip(fm).map(|(a, b)| a * b).sum();
                    C64::new(0.0, 0.5 * hbar * dot).exp()
                })
                .collect()
        })
        .collect();

    // ω phase tables for all three mode families.
    let phase_table = |modes: &[Mode]| -> Vec<Vec<C64>> {
        omega_pts
            .iter()
            .map(|w| {
                modes
                    .iter()
                    .map(|m| {
                        let p: f64 = m
                            .iter()
                            .zip(w.angles())
                            .map(|(&mi, &wi)| f64::from(mi) * wi)
                            .sum();
                        C64::new(0.0, p).exp()
                    })
                    .collect()
            })
            .collect()
    };
    let ephi = phase_table(a.modes());
    let epsi = phase_table(b.modes());
    let bmode_list: Vec<Mode> = bmodes.iter().map(|(m, _)| m.clone()).collect();
    let eb = phase_table(&bmode_list);

    let grid_indices: Vec<Vec<usize>> = (0..npts).map(|flat| unflatten(flat, n, pts)).collect();
    let coords: Vec<Vec<f64>> = (0..npts).map(|flat| grid.point(flat)).collect();
    let weight = grid.weight();

    // Main quadrature, parallel over output x.
    let columns: Vec<Vec<C64>> = (0..npts)
        .into_par_iter()
        .map(|x_flat| {
            let x = &coords[x_flat];
            let xi = &grid_indices[x_flat];
            // Λ mode coefficients for this x-row: λ[y][κ].
            let nb = bmodes.len();
            let mut lam = vec![C64::new(0.0, 0.0); npts * nb];
            for (y_flat, y) in coords.iter().enumerate() {
                for (kappa, (_, fm)) in bmodes.iter().enumerate() {
                    let a_m: f64 = fm.freq.iter().zip(x).map(|(f, v)| f * v).sum();
                    let b_m: f64 = fm.freq.iter().zip(y).map(|(f, v)| f * v).sum();
                    let kernel = triangle_moment(0, 0, hbar * (a_m - b_m), hbar * b_m);
                    let prefactor = C64::new(0.0, -hbar * a_m / 2.0).exp();
                    let mut combined_sum = C64::new(0.0, 0.0);
                    for &(j, k, c) in &fm.pairs {
                        let combined = y[j] * (x[k] - y[k]) - y[k] * (x[j] - y[j]);
                        combined_sum += c * combined;
                    }
                    lam[y_flat * nb + kappa] = combined_sum * prefactor * kernel;
                }
            }
            // Ψ index of x−y and Φ↔(y−x) difference index per y.
            let mut psi_idx = vec![usize::MAX; npts];
            let mut diff_idx = vec![0usize; npts];
            for (y_flat, yi) in grid_indices.iter().enumerate() {
                let mut ok = true;
                let mut pflat = 0usize;
                let mut dflat = 0usize;
                for axis in 0..n {
                    let di = xi[axis] as isize - yi[axis] as isize;
                    let k = di + (pts / 2) as isize;
                    if k < 0 || k >= pts as isize {
                        ok = false;
                    }
                    pflat = pflat * pts + k.rem_euclid(pts as isize) as usize;
                    dflat = dflat * diffs + (yi[axis] + (pts - 1) - xi[axis]);
                }
                if ok {
                    psi_idx[y_flat] = pflat;
                }
                diff_idx[y_flat] = dflat;
            }

            let mut column = vec![C64::new(0.0, 0.0); nomega];
            for (w_flat, col) in column.iter_mut().enumerate() {
                let ea = &ephi[w_flat];
                let ebv = &epsi[w_flat];
                let ebm = &eb[w_flat];
                let mut acc = C64::new(0.0, 0.0);
                for y_flat in 0..npts {
                    let pidx = psi_idx[y_flat];
                    if pidx == usize::MAX {
                        continue;
                    }
                    let mut aval = C64::new(0.0, 0.0);
                    for mi in 0..fa.len() {
                        aval += a.mode_slice(mi)[y_flat]
                            * diffphase[mi][diff_idx[y_flat]]
                            * ea[mi];
                    }
                    if aval == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut bval = C64::new(0.0, 0.0);
                    for mj in 0..fb.len() {
                        bval += b.mode_slice(mj)[pidx] * transphase[mj][y_flat] * ebv[mj];
                    }
                    let mut lam_val = 0.0;
                    for kappa in 0..nb {
                        lam_val += (lam[y_flat * nb + kappa] * ebm[kappa]).re;
                    }
                    let phase = C64::new(0.0, -hbar * lam_val).exp();
                    acc += aval * bval * phase;
                }
                *col = acc * weight;
            }
            column
        })
        .collect();

    // ω samples → hull modes (d-dimensional FFT per grid point).
    let out = omega_samples_to_modes(&columns, d, g, nomega, npts)?;
    let tol = a.provenance_tol + b.provenance_tol + boundary_tail(&a) + boundary_tail(&b);
    let mut out =
        SampledSymbol::new(*grid, d, out.0, out.1, tol)?;
    out.prune_modes(MODE_PRUNE);
    Ok(Symbol::from_sampled(out))
}

/// Convert per-x sample columns (`columns[x][ω]`) into mode-resolved
/// tensors: forward DFT over the ω axes, frequencies folded into signed
/// modes.
fn omega_samples_to_modes(
    columns: &[Vec<C64>],
    d: usize,
    g: usize,
    nomega: usize,
    npts: usize,
) -> Result<(Vec<Mode>, Vec<C64>)> {
    // c_m = (1/g^d) Σ_j f(ω_j) e^{−i m·ω_j} — a forward DFT.
    let mut mode_tensors = vec![C64::new(0.0, 0.0); nomega * npts];
    let mut buf = vec![C64::new(0.0, 0.0); nomega];
    for (x_flat, col) in columns.iter().enumerate() {
        buf.copy_from_slice(col);
        fft_nd(&mut buf, d, g, false);
        for w_flat in 0..nomega {
            mode_tensors[w_flat * npts + x_flat] = buf[w_flat] / nomega as f64;
        }
    }
    let modes: Vec<Mode> = (0..nomega)
        .map(|flat| {
            unflatten(flat, d, g)
                .into_iter()
                .map(|k| {
                    if k < g / 2 {
                        k as i32
                    } else {
                        k as i32 - g as i32
                    }
                })
                .collect()
        })
        .collect();
    Ok((modes, mode_tensors))
}

/// The magnetic Moyal product through the partial Fourier conjugation.
pub fn moyal_magnetic(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    f: &Symbol,
    g: &Symbol,
    omega_grid: &OmegaGrid,
    grid: &GridSpec,
) -> Result<Symbol> {
    require_momentum(f, "moyal_magnetic")?;
    require_momentum(g, "moyal_magnetic")?;
    if grid.realization != Realization::Position {
        return Err(Error::invalid("moyal grid must be the Position-side grid"));
    }
    let phi = f.inverse_partial_fourier()?;
    let psi = g.inverse_partial_fourier()?;
    let product = compose_magnetic(model, field, hbar, &phi, &psi, omega_grid, grid)?;
    product.partial_fourier()
}

/// Magnetic Poisson bracket in the X-realization (convolution form):
/// `{Φ,Ψ}^B = −i Σ_j (Q_jΦ ◊₀ δ_jΨ − δ_jΦ ◊₀ Q_jΨ) + Σ_{jk} B^{jk}(Q_jΦ ◊₀ Q_kΨ)`.
pub fn poisson_x(
    model: &HullModel,
    field: &MagneticField,
    phi: &Symbol,
    psi: &Symbol,
) -> Result<Symbol> {
    let grid = common_grid(phi, psi)?;
    poisson_x_on(model, field, phi, psi, &grid)
}

pub fn poisson_x_on(
    model: &HullModel,
    field: &MagneticField,
    phi: &Symbol,
    psi: &Symbol,
    grid: &GridSpec,
) -> Result<Symbol> {
    require_position(phi, "poisson_x")?;
    require_position(psi, "poisson_x")?;
    let n = grid.dim;
    let a = phi.sample(grid)?;
    let b = psi.sample(grid)?;

    let mut acc: Option<SampledSymbol> = None;
    let mut add = |term: SampledSymbol, s: C64| -> Result<()> {
        acc = Some(match &acc {
            None => term.scale(s),
            Some(prev) => prev.add_scaled(&term, s)?,
        });
        Ok(())
    };

    for j in 0..n {
        let mut e = vec![0usize; n];
        e[j] = 1;
        let qa = a.mul_coordinate_power(&e);
        let db = b.derive_hull(model, &e)?;
        add(convolve_mode_tables(&qa, &db)?, C64::new(0.0, -1.0))?;
        let da = a.derive_hull(model, &e)?;
        let qb = b.mul_coordinate_power(&e);
        add(convolve_mode_tables(&da, &qb)?, C64::new(0.0, 1.0))?;
    }
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let comp = field.component(j, k);
            if comp.is_zero() {
                continue;
            }
            let mut ej = vec![0usize; n];
            ej[j] = 1;
            let mut ek = vec![0usize; n];
            ek[k] = 1;
            let qa = a.mul_coordinate_power(&ej);
            let qb = b.mul_coordinate_power(&ek);
            let conv = convolve_mode_tables(&qa, &qb)?;
            add(conv.mul_hull(&comp), C64::new(1.0, 0.0))?;
        }
    }
    let mut out = acc.expect("n ≥ 1 produces at least one term");
    out.prune_modes(MODE_PRUNE);
    Ok(Symbol::from_sampled(out))
}

/// Magnetic Poisson bracket in the X*-realization (pointwise form):
/// `{f,g}_B = Σ_j (∂_{ξj}f δ_j g − δ_j f ∂_{ξj}g) − Σ_{jk} B^{jk} ∂_{ξj}f ∂_{ξk}g`.
///
/// Atom-backed operands stay in the closed atom algebra (exact); sampled
/// operands use 4th-order grid differences.
pub fn poisson_xi(
    model: &HullModel,
    field: &MagneticField,
    f: &Symbol,
    g: &Symbol,
) -> Result<Symbol> {
    require_momentum(f, "poisson_xi")?;
    require_momentum(g, "poisson_xi")?;
    let n = f.dim();
    match (f.atoms(), g.atoms()) {
        (Some(fa), Some(ga)) => {
            let mut out: Vec<crate::symbols::Atom> = Vec::new();
            for af in fa {
                for ag in ga {
                    for j in 0..n {
                        let mut e = vec![0usize; n];
                        e[j] = 1;
                        out.push(af.derive_x(j).product(&ag.derive_hull(model, &e)?));
                        out.push(
                            af.derive_hull(model, &e)?
                                .product(&ag.derive_x(j))
                                .scale(C64::new(-1.0, 0.0)),
                        );
                    }
                    for j in 0..n {
                        for k in 0..n {
                            if j == k {
                                continue;
                            }
                            let comp = field.component(j, k);
                            if comp.is_zero() {
                                continue;
                            }
                            out.push(
                                af.derive_x(j)
                                    .product(&ag.derive_x(k))
                                    .mul_hull(&comp)
                                    .scale(C64::new(-1.0, 0.0)),
                            );
                        }
                    }
                }
            }
            Symbol::from_atoms(Realization::Momentum, out)
        }
        _ => {
            let grid = common_grid(f, g)?;
            let a = f.sample(&grid)?;
            let b = g.sample(&grid)?;
            let mut acc: Option<SampledSymbol> = None;
            let mut add = |term: SampledSymbol, s: C64| -> Result<()> {
                acc = Some(match &acc {
                    None => term.scale(s),
                    Some(prev) => prev.add_scaled(&term, s)?,
                });
                Ok(())
            };
            for j in 0..n {
                let mut e = vec![0usize; n];
                e[j] = 1;
                add(
                    a.derive_grid(j).mul_pointwise(&b.derive_hull(model, &e)?)?,
                    C64::new(1.0, 0.0),
                )?;
                add(
                    a.derive_hull(model, &e)?.mul_pointwise(&b.derive_grid(j))?,
                    C64::new(-1.0, 0.0),
                )?;
            }
            for j in 0..n {
                for k in 0..n {
                    if j == k {
                        continue;
                    }
                    let comp = field.component(j, k);
                    if comp.is_zero() {
                        continue;
                    }
                    add(
                        a.derive_grid(j)
                            .mul_pointwise(&b.derive_grid(k))?
                            .mul_hull(&comp),
                        C64::new(-1.0, 0.0),
                    )?;
                }
            }
            let mut out = acc.expect("n ≥ 1");
            out.prune_modes(MODE_PRUNE);
            Ok(Symbol::from_sampled(out))
        }
    }
}

/// Phase-space restriction `π_ω(f)(x, ξ) = f(θ_x[ω], ξ)` sampled on
/// xgrid × ξgrid (row-major `[x][ξ]`).
pub struct PhaseSpaceSample {
    pub xgrid: GridSpec,
    pub xigrid: GridSpec,
    pub values: Vec<C64>,
}

pub fn pi_omega(
    model: &HullModel,
    f: &Symbol,
    omega: &HullPoint,
    xgrid: &GridSpec,
    xigrid: &GridSpec,
) -> Result<PhaseSpaceSample> {
    let mut values = Vec::with_capacity(xgrid.len() * xigrid.len());
    for xf in 0..xgrid.len() {
        let x = xgrid.point(xf);
        let w = model.act(omega, &x)?;
        for kf in 0..xigrid.len() {
            let xi = xigrid.point(kf);
            values.push(f.evaluate(&w, &xi));
        }
    }
    Ok(PhaseSpaceSample {
        xgrid: *xgrid,
        xigrid: *xigrid,
        values,
    })
}

/// Defect of the Poisson-map property `π_ω({f,g}_B) = {π_ω f, π_ω g}_{B_ω}`
/// with the right-hand side evaluated by central differences of step
/// `step` in both phase-space directions (the independent path along the
/// orbit).  Returns the max abs defect over a subsample of phase space.
pub fn pi_omega_bracket_defect(
    model: &HullModel,
    field: &MagneticField,
    f: &Symbol,
    g: &Symbol,
    omega: &HullPoint,
    sample_points: &[(Vec<f64>, Vec<f64>)],
    step: f64,
) -> Result<f64> {
    let n = f.dim();
    let bracket = poisson_xi(model, field, f, g)?;
    let eval = |s: &Symbol, x: &[f64], xi: &[f64]| -> Result<C64> {
        Ok(s.evaluate(&model.act(omega, x)?, xi))
    };
    let mut worst = 0.0_f64;
    for (x, xi) in sample_points {
        let lhs = eval(&bracket, x, xi)?;
        let mut rhs = C64::new(0.0, 0.0);
        let fd_x = |s: &Symbol, j: usize| -> Result<C64> {
            let mut xp = x.clone();
            xp[j] += step;
            let mut xm = x.clone();
            xm[j] -= step;
            Ok((eval(s, &xp, xi)? - eval(s, &xm, xi)?) / (2.0 * step))
        };
        let fd_xi = |s: &Symbol, j: usize| -> Result<C64> {
            let mut xp = xi.clone();
            xp[j] += step;
            let mut xm = xi.clone();
            xm[j] -= step;
            Ok((eval(s, x, &xp)? - eval(s, x, &xm)?) / (2.0 * step))
        };
        for j in 0..n {
            rhs += fd_xi(f, j)? * fd_x(g, j)? - fd_x(f, j)? * fd_xi(g, j)?;
        }
        let w_at_x = model.act(omega, x)?;
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let comp = field.component(j, k);
                if comp.is_zero() {
                    continue;
                }
                rhs -= comp.evaluate(&w_at_x) * fd_xi(f, j)? * fd_xi(g, k)?;
            }
        }
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// `‖Φ‖_{L¹} = ∫dx ‖Φ(x)‖_A` with the fiber norm bracketed by
/// `[ωgrid max, Σ_m |c_m|]`; the returned scalar is the rigorous upper
/// bracket (the surrogate that dominates `‖·‖ℏᴮ`).
pub fn l1_norm(phi: &Symbol) -> Result<f64> {
    Ok(l1_norm_bracket(phi, None)?.1)
}

pub fn l1_norm_bracket(phi: &Symbol, omega_grid: Option<&OmegaGrid>) -> Result<(f64, f64)> {
    require_position(phi, "l1_norm")?;
    let grid = phi.default_grid()?;
    let s = phi.sample(&grid)?;
    let npts = grid.len();
    let mut upper = 0.0;
    for flat in 0..npts {
        let fiber_l1: f64 = (0..s.modes().len())
            .map(|mi| s.mode_slice(mi)[flat].norm())
            .sum();
        upper += fiber_l1;
    }
    upper *= grid.weight();
    let lower = match omega_grid {
        None => upper,
        Some(og) => {
            let mut acc = 0.0;
            for flat in 0..npts {
                let mut sup = 0.0_f64;
                for w in og.points() {
                    sup = sup.max(s.value_at_index(&w, flat).norm());
                }
                acc += sup;
            }
            acc * grid.weight()
        }
    };
    Ok((lower.min(upper), upper))
}

/// The three tiers of the ħ-expansion of the twisted product.
pub struct ExpansionReport {
    pub leading: Symbol,
    /// `−(i/2){Φ,Ψ}^B` (the sign and factor folded in).
    pub subleading: Symbol,
    /// `ħ^{−2}(Φ◊ℏᴮΨ − Φ◊₀Ψ − ħ·subleading)`.
    pub remainder: Symbol,
    pub product: Symbol,
    pub leading_norm: f64,
    pub subleading_norm: f64,
    pub remainder_norm: f64,
    pub hbar: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionSummary {
    pub leading_norm: f64,
    pub subleading_norm: f64,
    pub remainder_norm: f64,
    pub hbar: f64,
    pub reliable: bool,
}

impl ExpansionReport {
    pub fn summary(&self) -> ExpansionSummary {
        ExpansionSummary {
            leading_norm: self.leading_norm,
            subleading_norm: self.subleading_norm,
            remainder_norm: self.remainder_norm,
            hbar: self.hbar,
            reliable: self.reliable,
        }
    }

    /// `‖Φ◊ℏᴮΨ − (leading + ħ·subleading + ħ²·remainder)‖_{L¹}` — zero up
    /// to alignment arithmetic by construction.
    pub fn reconstruction_defect(&self) -> Result<f64> {
        let p = self.product.sampled().ok_or_else(|| {
            Error::invalid("expansion product must be sampled")
        })?;
        let l = self.leading.sampled().unwrap();
        let s = self.subleading.sampled().unwrap();
        let r = self.remainder.sampled().unwrap();
        let recon = l
            .add_scaled(s, C64::new(self.hbar, 0.0))?
            .add_scaled(r, C64::new(self.hbar * self.hbar, 0.0))?;
        let diff = p.add_scaled(&recon, C64::new(-1.0, 0.0))?;
        l1_norm(&Symbol::from_sampled(diff))
    }
}

/// Reliability floor for the remainder extraction (subtraction
/// cancellation dominates below this on default grids).
pub const REMAINDER_HBAR_FLOOR: f64 = 1.0 / 32.0;

/// Compute the Theorem-1 tiers: leading ◊₀ term, bracket term, and the
/// remainder obtained by subtraction.
pub fn expansion_remainder(
    model: &HullModel,
    field: &MagneticField,
    hbar: f64,
    phi: &Symbol,
    psi: &Symbol,
    omega_grid: &OmegaGrid,
    grid: &GridSpec,
) -> Result<ExpansionReport> {
    let product = compose_magnetic(model, field, hbar, phi, psi, omega_grid, grid)?;
    let leading = compose_zero_on(phi, psi, grid)?;
    let bracket = poisson_x_on(model, field, phi, psi, grid)?;
    let subleading = Symbol::from_sampled(
        bracket
            .sampled()
            .expect("poisson_x output is sampled")
            .scale(C64::new(0.0, -0.5)),
    );

    let p = product.sampled().unwrap();
    let l = leading.sampled().unwrap();
    let s = subleading.sampled().unwrap();
    let diff = p
        .add_scaled(l, C64::new(-1.0, 0.0))?
        .add_scaled(s, C64::new(-hbar, 0.0))?;
    let remainder_s = diff.scale(C64::new(1.0 / (hbar * hbar), 0.0));
    let remainder = Symbol::from_sampled(remainder_s);

    let leading_norm = l1_norm(&leading)?;
    let subleading_norm = l1_norm(&subleading)?;
    let remainder_norm = l1_norm(&remainder)?;
    // subtraction error budget vs the extracted remainder scale
    let sub_tol = p.provenance_tol + l.provenance_tol + s.provenance_tol * hbar;
    let reliable =
        hbar >= REMAINDER_HBAR_FLOOR && sub_tol <= 0.1 * remainder_norm * hbar * hbar;

    Ok(ExpansionReport {
        leading,
        subleading,
        remainder,
        product,
        leading_norm,
        subleading_norm,
        remainder_norm,
        hbar,
        reliable,
    })
}
