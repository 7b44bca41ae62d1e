//! Torus hulls with linear (Kronecker) flows.
//!
//! The hull is `Ω = T^d` acted on by `X = R^n` through a frequency matrix
//! `F`: `θ_x[ω] = (ω + F x) mod 2π`.  Irrational `F` gives minimal /
//! topologically transitive dynamics, rational `F` periodic ones.  Hull
//! functions are finite Fourier series, so translation and the orbit
//! derivations `δ^α φ := ∂_x^α (φ∘θ_x)|_{x=0}` act exactly on coefficients:
//!
//! - translation: `c_m ↦ c_m e^{i m·Fx}`,
//! - derivation:  `c_m ↦ (i (Fᵀm)_1)^{α_1} ⋯ (i (Fᵀm)_n)^{α_n} c_m`.
//!
//! On a compact hull `C₀(Ω) = C(Ω)`, so "vanishing at infinity" is vacuous
//! for this model class.  The sup norm over `Ω` is bracketed by
//! `[grid max, Σ_m |c_m|]`; both ends are returned by [`seminorm_salpha`].

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Fourier mode index `m ∈ Z^d`.
pub type Mode = Vec<i32>;

/// The dynamical system `(T^d, θ, R^n)` with `θ_x[ω] = (ω + Fx) mod 2π`.
#[derive(Debug, Clone, PartialEq)]
pub struct HullModel {
    d: usize,
    n: usize,
    /// Row-major `d×n` frequency matrix.
    f: Vec<Vec<f64>>,
}

impl HullModel {
    pub fn new(d: usize, n: usize, f: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::invalid("hull model needs d ≥ 1 and n ≥ 1"));
        }
        if f.len() != d || f.iter().any(|row| row.len() != n) {
            return Err(Error::invalid(format!(
                "frequency matrix must be {d}×{n} row-major"
            )));
        }
        if f.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("frequency matrix entries must be finite"));
        }
        Ok(HullModel { d, n, f })
    }

    /// Identity-frequency model with `d = n`.
    pub fn identity(d: usize) -> Self {
        let f = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        HullModel { d, n: d, f }
    }

    pub fn torus_dim(&self) -> usize {
        self.d
    }

    pub fn action_dim(&self) -> usize {
        self.n
    }

    pub fn frequency(&self) -> &[Vec<f64>] {
        &self.f
    }

    /// `Fx ∈ R^d`.
    pub fn fx(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "action vector has dim {}, expected {}",
                x.len(),
                self.n
            )));
        }
        Ok(self
            .f
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `(Fᵀm)_k = Σ_j F_{jk} m_j` — the frequency vector of mode `m`.
    pub fn mode_frequency(&self, m: &[i32]) -> Vec<f64> {
        (0..self.n)
            .map(|k| {
                self.f
                    .iter()
                    .zip(m)
                    .map(|(row, &mj)| row[k] * f64::from(mj))
                    .sum()
            })
            .collect()
    }

    /// `m·Fx` with a single fused reduction (used for translation phases).
    pub fn mode_phase(&self, m: &[i32], x: &[f64]) -> f64 {
        self.mode_frequency(m)
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// The action: `θ_x[ω] = (ω + Fx) mod 2π`.
    pub fn act(&self, omega: &HullPoint, x: &[f64]) -> Result<HullPoint> {
        if omega.angles.len() != self.d {
            return Err(Error::invalid(format!(
                "hull point has dim {}, expected {}",
                omega.angles.len(),
                self.d
            )));
        }
        let shift = self.fx(x)?;
        let angles = omega
            .angles
            .iter()
            .zip(&shift)
            .map(|(w, s)| reduce_angle(w + s))
            .collect();
        Ok(HullPoint { angles })
    }
}

/// Reduce to `[0, 2π)` with a single fused mod (avoids drift from repeated
/// reductions).
pub fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can return exactly 2π when a is a tiny negative number.
    if r >= TAU {
        r - TAU
    } else {
        r
    }
}

/// A point `ω ∈ T^d`, componentwise in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullPoint {
    angles: Vec<f64>,
}

impl HullPoint {
    pub fn new(angles: Vec<f64>) -> Self {
        HullPoint {
            angles: angles.into_iter().map(reduce_angle).collect(),
        }
    }

    pub fn zero(d: usize) -> Self {
        HullPoint {
            angles: vec![0.0; d],
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn dim(&self) -> usize {
        self.angles.len()
    }
}

/// Finite Fourier series `φ(ω) = Σ_m c_m e^{i m·ω}` on `T^d`.
///
/// The `real` flag certifies the conjugate symmetry `c_{−m} = conj(c_m)`;
/// it is preserved by translation, derivation and real-linear combinations.
#[derive(Debug, Clone)]
pub struct HullFunction {
    d: usize,
    modes: BTreeMap<Mode, C64>,
    real: bool,
}

/// Coefficients below this magnitude are dropped when pruning.
const PRUNE_EPS: f64 = 1e-300;

impl HullFunction {
    pub fn zero(d: usize) -> Self {
        HullFunction {
            d,
            modes: BTreeMap::new(),
            real: true,
        }
    }

    pub fn constant(d: usize, c: C64) -> Self {
        let mut modes = BTreeMap::new();
        if c != C64::new(0.0, 0.0) {
            modes.insert(vec![0; d], c);
        }
        HullFunction {
            d,
            modes,
            real: c.im == 0.0,
        }
    }

    /// Build from a mode list; the `real` flag is detected from conjugate
    /// symmetry of the coefficients (tolerance 0: symmetry must be exact).
    pub fn from_modes(d: usize, entries: impl IntoIterator<Item = (Mode, C64)>) -> Result<Self> {
        let mut modes: BTreeMap<Mode, C64> = BTreeMap::new();
        for (m, c) in entries {
            if m.len() != d {
                return Err(Error::invalid(format!(
                    "mode index has dim {}, expected {}",
                    m.len(),
                    d
                )));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::invalid("mode coefficient must be finite"));
            }
            *modes.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
        }
        modes.retain(|_, c| c.norm() > PRUNE_EPS);
        let real = modes.iter().all(|(m, c)| {
            let neg: Mode = m.iter().map(|v| -v).collect();
            modes.get(&neg).map_or(false, |cn| *cn == c.conj())
        });
        Ok(HullFunction { d, modes, real })
    }

    /// `e^{i m·ω}` for a single mode.
    pub fn harmonic(d: usize, m: Mode) -> Result<Self> {
        Self::from_modes(d, [(m, C64::new(1.0, 0.0))])
    }

    /// `cos(m·ω)` (real-flagged pair of modes `±m`).
    pub fn cosine(d: usize, m: Mode) -> Result<Self> {
        let neg: Mode = m.iter().map(|v| -v).collect();
        Self::from_modes(d, [(m, C64::new(0.5, 0.0)), (neg, C64::new(0.5, 0.0))])
    }

    pub fn torus_dim(&self) -> usize {
        self.d
    }

    pub fn modes(&self) -> impl Iterator<Item = (&Mode, &C64)> {
        self.modes.iter()
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn is_real_flagged(&self) -> bool {
        self.real
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    /// `Σ_m |c_m|` — exact upper bound for `sup_ω |φ(ω)|`.
    pub fn coeff_l1(&self) -> f64 {
        self.modes.values().map(|c| c.norm()).sum()
    }

    /// `φ(ω) = Σ_m c_m e^{i m·ω}`.
    pub fn evaluate(&self, omega: &HullPoint) -> C64 {
        debug_assert_eq!(omega.dim(), self.d);
        let mut acc = C64::new(0.0, 0.0);
        for (m, c) in &self.modes {
            let phase: f64 = m
                .iter()
                .zip(omega.angles())
                .map(|(&mi, &wi)| f64::from(mi) * wi)
                .sum();
            acc += c * C64::new(0.0, phase).exp();
        }
        acc
    }

    /// `θ_x[φ]`, i.e. `c_m ↦ c_m e^{i m·Fx}` — exact, no truncation loss.
    pub fn translate(&self, model: &HullModel, x: &[f64]) -> Result<Self> {
        if x.len() != model.action_dim() {
            return Err(Error::invalid("translation vector dimension mismatch"));
        }
        let modes = self
            .modes
            .iter()
            .map(|(m, c)| {
                let phase = model.mode_phase(m, x);
                (m.clone(), c * C64::new(0.0, phase).exp())
            })
            .collect();
        Ok(HullFunction {
            d: self.d,
            modes,
            real: self.real,
        })
    }

    /// `δ^α φ`: `c_m ↦ Π_k (i (Fᵀm)_k)^{α_k} c_m` — exact.
    pub fn derive(&self, model: &HullModel, alpha: &[usize]) -> Result<Self> {
        if alpha.len() != model.action_dim() {
            return Err(Error::invalid("derivation multi-index dimension mismatch"));
        }
        let mut modes = BTreeMap::new();
        for (m, c) in &self.modes {
            let freq = model.mode_frequency(m);
            let mut factor = C64::new(1.0, 0.0);
            for (k, &ak) in alpha.iter().enumerate() {
                for _ in 0..ak {
                    factor *= C64::new(0.0, freq[k]);
                }
            }
            let v = c * factor;
            if v.norm() > PRUNE_EPS {
                modes.insert(m.clone(), v);
            }
        }
        Ok(HullFunction {
            d: self.d,
            modes,
            real: self.real,
        })
    }

    /// Pointwise product (mode convolution) — exact, support grows.
    pub fn mul(&self, other: &HullFunction) -> HullFunction {
        debug_assert_eq!(self.d, other.d);
        let mut modes: BTreeMap<Mode, C64> = BTreeMap::new();
        for (m1, c1) in &self.modes {
            for (m2, c2) in &other.modes {
                let m: Mode = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                *modes.entry(m).or_insert(C64::new(0.0, 0.0)) += c1 * c2;
            }
        }
        modes.retain(|_, c| c.norm() > PRUNE_EPS);
        HullFunction {
            d: self.d,
            modes,
            real: self.real && other.real,
        }
    }

    pub fn scale(&self, s: C64) -> HullFunction {
        let modes = self.modes.iter().map(|(m, c)| (m.clone(), c * s)).collect();
        HullFunction {
            d: self.d,
            modes,
            real: self.real && s.im == 0.0,
        }
    }

    pub fn add(&self, other: &HullFunction) -> HullFunction {
        debug_assert_eq!(self.d, other.d);
        let mut modes = self.modes.clone();
        for (m, c) in &other.modes {
            *modes.entry(m.clone()).or_insert(C64::new(0.0, 0.0)) += c;
        }
        modes.retain(|_, c| c.norm() > PRUNE_EPS);
        HullFunction {
            d: self.d,
            modes,
            real: self.real && other.real,
        }
    }

    /// Complex conjugate: `c_m ↦ conj(c_{−m})`.
    pub fn conj(&self) -> HullFunction {
        let modes = self
            .modes
            .iter()
            .map(|(m, c)| (m.iter().map(|v| -v).collect(), c.conj()))
            .collect();
        HullFunction {
            d: self.d,
            modes,
            real: self.real,
        }
    }

    /// Drop modes with any component above the cutoff `k` (explicit
    /// truncation; binary operations themselves never truncate).
    pub fn truncate(&self, k: i32) -> HullFunction {
        let modes = self
            .modes
            .iter()
            .filter(|(m, _)| m.iter().all(|v| v.abs() <= k))
            .map(|(m, c)| (m.clone(), *c))
            .collect();
        HullFunction {
            d: self.d,
            modes,
            real: self.real,
        }
    }
}

/// Uniform evaluation grid on `T^d`, `points_per_axis` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaGrid {
    pub d: usize,
    pub points_per_axis: usize,
}

impl OmegaGrid {
    pub fn new(d: usize, points_per_axis: usize) -> Result<Self> {
        if points_per_axis == 0 {
            return Err(Error::invalid("omega grid must be non-empty"));
        }
        Ok(OmegaGrid { d, points_per_axis })
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order (last axis fastest), matching the
    /// flat-index convention used by the ω-space FFTs.
    pub fn points(&self) -> Vec<HullPoint> {
        let g = self.points_per_axis;
        let step = TAU / g as f64;
        (0..self.len())
            .map(|flat| {
                HullPoint::new(
                    crate::numerics::unflatten(flat, self.d, g)
                        .into_iter()
                        .map(|i| i as f64 * step)
                        .collect(),
                )
            })
            .collect()
    }
}

/// Orbit restriction `φ_ω(x) = φ(θ_x[ω])` sampled on a list of action
/// vectors — the morphism into `BC_u(X)`.
pub fn orbit_function(
    model: &HullModel,
    phi: &HullFunction,
    omega: &HullPoint,
    xs: &[Vec<f64>],
) -> Result<Vec<C64>> {
    xs.iter()
        .map(|x| Ok(phi.evaluate(&model.act(omega, x)?)))
        .collect()
}

/// Bracket `[grid max, Σ|c_m|]` for `sup_Ω |δ^α φ|`.
///
/// The lower end converges to the true sup as the grid refines; the upper
/// end is the exact coefficient ℓ¹ bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormBracket {
    pub lower: f64,
    pub upper: f64,
}

/// `s^α(φ) = ‖δ^α φ‖_{C(Ω)}`, bracketed.
pub fn seminorm_salpha(
    model: &HullModel,
    phi: &HullFunction,
    alpha: &[usize],
    grid: &OmegaGrid,
) -> Result<SeminormBracket> {
    if grid.is_empty() {
        return Err(Error::invalid("seminorm requires a non-empty omega grid"));
    }
    let dphi = phi.derive(model, alpha)?;
    let lower = grid
        .points()
        .iter()
        .map(|w| dphi.evaluate(w).norm())
        .fold(0.0, f64::max);
    Ok(SeminormBracket {
        lower,
        upper: dphi.coeff_l1(),
    })
}

/// Result of the rational-relation stabilizer search for
/// `X_ω = {x ∈ R^n : Fx ∈ 2πZ^d}` (the same lattice for every ω in this
/// model class).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizerReport {
    /// No nonzero stabilizer found within the search bound.
    pub free_up_to_bound: bool,
    /// Denominator / lattice search bound that was used.
    pub bound: u64,
    /// Dimension of the continuous fixed subspace `ker F` (n means every
    /// point is fixed by the whole group).
    pub kernel_dim: usize,
    /// Generators of the discovered stabilizer lattice (empty when free or
    /// when only a continuous kernel exists).
    pub generators: Vec<Vec<f64>>,
    pub note: String,
}

/// Search for the stabilizer lattice of the action, up to a
/// rational-relation bound `q_bound` on denominators.
///
/// Inconclusive searches report `free_up_to_bound = true` — freeness is
/// never "proven", only certified up to the bound.
pub fn stabilizer_report(model: &HullModel, q_bound: u64) -> StabilizerReport {
    let d = model.torus_dim();
    let n = model.action_dim();
    let fmat = model.frequency();
    let scale = fmat
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0_f64, f64::max);

    if scale == 0.0 {
        return StabilizerReport {
            free_up_to_bound: false,
            bound: q_bound,
            kernel_dim: n,
            generators: vec![],
            note: "F = 0: every point is fixed; stabilizer = R^n".into(),
        };
    }

    // Continuous part: ker F ≠ {0} makes the action non-free outright.
    let kernel_dim = kernel_dimension(fmat, d, n, 1e-12 * scale);
    if kernel_dim > 0 {
        return StabilizerReport {
            free_up_to_bound: false,
            bound: q_bound,
            kernel_dim,
            generators: vec![],
            note: format!("ker F has dimension {kernel_dim}: continuous stabilizer subspace"),
        };
    }

    match n {
        1 => stabilizer_n1(model, q_bound),
        _ => stabilizer_lattice_search(model, q_bound),
    }
}

/// n = 1: x·f ∈ 2πZ^d needs all ratios f_j/f_p rational with a common
/// period; checked through continued-fraction convergents with denominators
/// up to the bound.
fn stabilizer_n1(model: &HullModel, q_bound: u64) -> StabilizerReport {
    let freqs: Vec<f64> = model.frequency().iter().map(|row| row[0]).collect();
    // Pivot on the largest |f_j| for conditioning.
    let (pivot, &fp) = freqs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("d ≥ 1");

    // Candidate period: x = 2π q L / f_p where L = lcm of the convergent
    // denominators of f_j/f_p. Build L incrementally.
    let mut lcm: u64 = 1;
    for (j, &fj) in freqs.iter().enumerate() {
        if j == pivot || fj == 0.0 {
            continue;
        }
        let ratio = fj / fp;
        match rational_approx(ratio, q_bound) {
            Some((_, q)) => {
                lcm = match lcm.checked_mul(q / gcd(lcm, q)) {
                    Some(l) if l <= q_bound => l,
                    _ => {
                        return free_report(model.action_dim(), q_bound);
                    }
                };
            }
            None => return free_report(model.action_dim(), q_bound),
        }
    }
    // Verify the candidate: x f_j / 2π must all be near-integers.
    let x = TAU * lcm as f64 / fp;
    let defect = freqs
        .iter()
        .map(|&fj| {
            let t = x * fj / TAU;
            (t - t.round()).abs()
        })
        .fold(0.0, f64::max);
    if defect < 1e-9 * lcm as f64 {
        StabilizerReport {
            free_up_to_bound: false,
            bound: q_bound,
            kernel_dim: 0,
            generators: vec![vec![x]],
            note: format!("stabilizer lattice generated by x = 2π·{lcm}/f_{pivot}"),
        }
    } else {
        free_report(model.action_dim(), q_bound)
    }
}

/// n ≥ 2: pick n rows of F forming the best-conditioned n×n block, run
/// `x = 2π F_I^{-1} k` over integer k in a box and check the remaining rows
/// land on 2πZ.  The box is capped so the scan stays desk-scale; the note
/// records the searched region.
fn stabilizer_lattice_search(model: &HullModel, q_bound: u64) -> StabilizerReport {
    let d = model.torus_dim();
    let n = model.action_dim();
    let fmat = model.frequency();

    // Only n = 2 is exercised by the model class; fall back to a plain
    // box scan over row pairs.
    let kmax = q_bound.min(if d > n { 512 } else { 1 }) as i64;
    let rows: Vec<usize> = (0..d).collect();

    // Choose the row pair with the largest |det|.
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..d {
        for j in (i + 1)..d {
            let det = fmat[i][0] * fmat[j][1] - fmat[i][1] * fmat[j][0];
            if best.map_or(true, |(_, _, b)| det.abs() > b.abs()) {
                best = Some((i, j, det));
            }
        }
    }
    let Some((ri, rj, det)) = best.filter(|(_, _, det)| det.abs() > 1e-12) else {
        return StabilizerReport {
            free_up_to_bound: false,
            bound: q_bound,
            kernel_dim: 0,
            generators: vec![],
            note: "rank of F below n: degenerate search skipped".into(),
        };
    };

    let solve = |k1: f64, k2: f64| -> Vec<f64> {
        // x = 2π F_I^{-1} (k1, k2)
        let a = fmat[ri][0];
        let b = fmat[ri][1];
        let c = fmat[rj][0];
        let e = fmat[rj][1];
        vec![
            TAU * (e * k1 - b * k2) / det,
            TAU * (-c * k1 + a * k2) / det,
        ]
    };

    let mut generators = Vec::new();
    'outer: for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let x = solve(k1 as f64, k2 as f64);
            let mut ok = true;
            for &r in &rows {
                if r == ri || r == rj {
                    continue;
                }
                let t = (fmat[r][0] * x[0] + fmat[r][1] * x[1]) / TAU;
                if (t - t.round()).abs() > 1e-9 {
                    ok = false;
                    break;
                }
            }
            if ok {
                generators.push(x);
                if generators.len() >= 2 {
                    break 'outer;
                }
            }
        }
    }

    if generators.is_empty() {
        StabilizerReport {
            free_up_to_bound: true,
            bound: q_bound,
            kernel_dim: 0,
            generators: vec![],
            note: format!("no lattice point found with |k|∞ ≤ {kmax}"),
        }
    } else {
        StabilizerReport {
            free_up_to_bound: false,
            bound: q_bound,
            kernel_dim: 0,
            generators,
            note: "stabilizer lattice points found".into(),
        }
    }
}

fn free_report(_n: usize, q_bound: u64) -> StabilizerReport {
    StabilizerReport {
        free_up_to_bound: true,
        bound: q_bound,
        kernel_dim: 0,
        generators: vec![],
        note: format!("free up to denominator bound {q_bound}"),
    }
}

/// Best rational approximation p/q to `x` with q ≤ bound, if one matches to
/// relative tolerance 1e-10; continued-fraction convergents.
fn rational_approx(x: f64, q_bound: u64) -> Option<(i64, u64)> {
    let mut a = x;
    let (mut p0, mut q0, mut p1, mut q1): (i64, u64, i64, u64) = (1, 0, a.floor() as i64, 1);
    for _ in 0..64 {
        let frac = a - a.floor();
        if (x - p1 as f64 / q1 as f64).abs() <= 1e-14 * x.abs().max(1.0) {
            return Some((p1, q1));
        }
        if frac.abs() < 1e-15 {
            break;
        }
        a = 1.0 / frac;
        let ai = a.floor() as i64;
        let p2 = ai * p1 + p0;
        let q2 = (ai as u64).checked_mul(q1)?.checked_add(q0)?;
        if q2 > q_bound {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    if (x - p1 as f64 / q1 as f64).abs() <= 1e-14 * x.abs().max(1.0) {
        Some((p1, q1))
    } else {
        None
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

/// Numerical kernel dimension of the d×n matrix F (Gram eigenvalues below
/// tol² count as null directions).
fn kernel_dimension(f: &[Vec<f64>], d: usize, n: usize, tol: f64) -> usize {
    // Gram matrix G = FᵀF (n×n, n ≤ 2 in practice).
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = (0..d).map(|r| f[r][i] * f[r][j]).sum();
        }
    }
    match n {
        1 => usize::from(g[0][0].sqrt() <= tol),
        2 => {
            let tr = g[0][0] + g[1][1];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            let l1 = tr / 2.0 + disc;
            let l2 = tr / 2.0 - disc;
            usize::from(l1.max(0.0).sqrt() <= tol) + usize::from(l2.max(0.0).sqrt() <= tol)
        }
        _ => {
            // crude power-iteration-free bound for n > 2: diagonal test
            (0..n).filter(|&i| g[i][i].sqrt() <= tol).count()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn kronecker_sqrt2() -> HullModel {
        HullModel::new(2, 1, vec![vec![1.0], vec![2.0_f64.sqrt()]]).unwrap()
    }

    #[test]
    fn act_identity_frequency() {
        let model = HullModel::identity(2);
        let w = HullPoint::zero(2);
        let out = model
            .act(&w, &[std::f64::consts::FRAC_PI_2, 0.0])
            .unwrap();
        assert!((out.angles()[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(out.angles()[1].abs() < 1e-15);
    }

    #[test]
    fn act_wraparound() {
        let model = HullModel::identity(2);
        let w = HullPoint::new(vec![3.0 * std::f64::consts::FRAC_PI_2, 0.0]);
        let out = model.act(&w, &[std::f64::consts::PI, 0.0]).unwrap();
        assert!((out.angles()[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn act_kronecker_flow() {
        // Oracle: plain floating evaluation of 2π√2 mod 2π, cross-checked
        // against act(act(ω,π),π).
        let model = kronecker_sqrt2();
        let w = HullPoint::zero(2);
        let expected = (TAU * 2.0_f64.sqrt()).rem_euclid(TAU);
        let out = model.act(&w, &[TAU]).unwrap();
        assert!(out.angles()[0].abs() < 1e-12);
        assert!((out.angles()[1] - expected).abs() < 1e-12);

        let half = model.act(&w, &[std::f64::consts::PI]).unwrap();
        let two_step = model.act(&half, &[std::f64::consts::PI]).unwrap();
        assert!((two_step.angles()[1] - out.angles()[1]).abs() < 1e-12);
    }

    #[test]
    fn act_dimension_mismatch_is_error() {
        let model = HullModel::identity(2);
        let w = HullPoint::zero(2);
        assert!(model.act(&w, &[1.0]).is_err());
        let w3 = HullPoint::zero(3);
        assert!(model.act(&w3, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn group_law_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = kronecker_sqrt2();
        for _ in 0..100 {
            let w = HullPoint::new(vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)]);
            let x = [rng.gen_range(-10.0..10.0)];
            let y = [rng.gen_range(-10.0..10.0)];
            let a = model.act(&model.act(&w, &x).unwrap(), &y).unwrap();
            let b = model.act(&w, &[x[0] + y[0]]).unwrap();
            for (u, v) in a.angles().iter().zip(b.angles()) {
                let diff = (u - v).abs();
                let wrapped = diff.min(TAU - diff);
                assert!(wrapped < 1e-12, "group law defect {wrapped}");
            }
        }
    }

    #[test]
    fn translate_phase() {
        // φ = e^{iω₁}, F = I₂, x = (π, 0) → −e^{iω₁}
        let model = HullModel::identity(2);
        let phi = HullFunction::harmonic(2, vec![1, 0]).unwrap();
        let shifted = phi.translate(&model, &[std::f64::consts::PI, 0.0]).unwrap();
        let (_, coeff) = shifted.modes().next().unwrap();
        assert!((coeff - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn translate_zero_is_identity() {
        let model = kronecker_sqrt2();
        let phi = HullFunction::from_modes(
            2,
            [(vec![1, 0], c(0.3, 0.1)), (vec![-1, 2], c(-0.2, 0.4))],
        )
        .unwrap();
        let same = phi.translate(&model, &[0.0]).unwrap();
        for ((m1, c1), (m2, c2)) in phi.modes().zip(same.modes()) {
            assert_eq!(m1, m2);
            assert!((c1 - c2).norm() < 1e-15);
        }
    }

    #[test]
    fn translate_group_law_on_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = kronecker_sqrt2();
        let phi = HullFunction::from_modes(
            2,
            [(vec![2, -1], c(0.5, -0.3)), (vec![0, 3], c(0.1, 0.9))],
        )
        .unwrap();
        for _ in 0..20 {
            let x = [rng.gen_range(-5.0..5.0)];
            let y = [rng.gen_range(-5.0..5.0)];
            let a = phi
                .translate(&model, &x)
                .unwrap()
                .translate(&model, &y)
                .unwrap();
            let b = phi.translate(&model, &[x[0] + y[0]]).unwrap();
            for ((_, c1), (_, c2)) in a.modes().zip(b.modes()) {
                assert!((c1 - c2).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn derive_harmonic() {
        let model = HullModel::identity(2);
        let phi = HullFunction::harmonic(2, vec![1, 0]).unwrap();
        let d = phi.derive(&model, &[1, 0]).unwrap();
        let (_, coeff) = d.modes().next().unwrap();
        assert!((coeff - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn derive_constant_vanishes() {
        let model = HullModel::identity(2);
        let phi = HullFunction::constant(2, c(4.2, -1.0));
        for alpha in [[1, 0], [0, 1], [2, 1]] {
            assert!(phi.derive(&model, &alpha).unwrap().is_zero());
        }
    }

    #[test]
    fn derive_kronecker_combined_frequency() {
        // F = (1, √2)ᵀ, φ = e^{i(ω₁+ω₂)}, α = (1) → i(1+√2)φ
        let model = kronecker_sqrt2();
        let phi = HullFunction::harmonic(2, vec![1, 1]).unwrap();
        let d = phi.derive(&model, &[1]).unwrap();
        let (_, coeff) = d.modes().next().unwrap();
        let expected = c(0.0, 1.0 + 2.0_f64.sqrt());
        assert!((coeff - expected).norm() < 1e-14);
    }

    #[test]
    fn mixed_derivatives_commute_exactly() {
        let model = HullModel::identity(2);
        let phi = HullFunction::from_modes(
            2,
            [(vec![1, 2], c(0.7, 0.2)), (vec![-3, 1], c(-0.1, 0.5))],
        )
        .unwrap();
        let a = phi
            .derive(&model, &[1, 0])
            .unwrap()
            .derive(&model, &[0, 1])
            .unwrap();
        let b = phi
            .derive(&model, &[0, 1])
            .unwrap()
            .derive(&model, &[1, 0])
            .unwrap();
        for ((m1, c1), (m2, c2)) in a.modes().zip(b.modes()) {
            assert_eq!(m1, m2);
            assert_eq!(c1, c2);
        }
    }

    #[test]
    fn evaluate_basics() {
        let phi = HullFunction::constant(2, c(1.0, 0.0));
        let w = HullPoint::new(vec![1.3, 5.1]);
        assert!((phi.evaluate(&w) - c(1.0, 0.0)).norm() < 1e-15);

        let e1 = HullFunction::harmonic(2, vec![1, 0]).unwrap();
        let w = HullPoint::new(vec![std::f64::consts::FRAC_PI_2, 0.0]);
        assert!((e1.evaluate(&w) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn real_flagged_evaluates_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = HullFunction::cosine(2, vec![1, 0]).unwrap();
        assert!(phi.is_real_flagged());
        for _ in 0..20 {
            let w = HullPoint::new(vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)]);
            assert!(phi.evaluate(&w).im.abs() <= 1e-12);
        }
    }

    #[test]
    fn orbit_function_matches_translate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = kronecker_sqrt2();
        let phi = HullFunction::from_modes(
            2,
            [(vec![1, 0], c(0.4, 0.2)), (vec![0, -2], c(0.3, -0.6))],
        )
        .unwrap();
        for _ in 0..20 {
            let w = HullPoint::new(vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)]);
            let x = vec![rng.gen_range(-4.0..4.0)];
            let orbit = orbit_function(&model, &phi, &w, &[x.clone()]).unwrap();
            let direct = phi.translate(&model, &x).unwrap().evaluate(&w);
            assert!((orbit[0] - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn orbit_function_constant_and_closed_form() {
        let model = kronecker_sqrt2();
        let cphi = HullFunction::constant(2, c(2.0, 0.0));
        let w = HullPoint::new(vec![0.7, 1.9]);
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![0.3 * i as f64]).collect();
        for v in orbit_function(&model, &cphi, &w, &xs).unwrap() {
            assert!((v - c(2.0, 0.0)).norm() < 1e-14);
        }

        // φ = e^{iω₁} on the Kronecker flow: φ_ω(x) = e^{iω₁} e^{ix}
        let phi = HullFunction::harmonic(2, vec![1, 0]).unwrap();
        let vals = orbit_function(&model, &phi, &w, &xs).unwrap();
        for (v, x) in vals.iter().zip(&xs) {
            let closed = c(0.0, w.angles()[0]).exp() * c(0.0, x[0]).exp();
            assert!((v - closed).norm() < 1e-12);
        }
    }

    #[test]
    fn seminorm_brackets() {
        let model = HullModel::identity(2);
        let grid = OmegaGrid::new(2, 16).unwrap();
        let phi = HullFunction::harmonic(2, vec![1, 0]).unwrap();
        let s = seminorm_salpha(&model, &phi, &[0, 0], &grid).unwrap();
        assert!((s.lower - 1.0).abs() < 1e-12);
        assert!((s.upper - 1.0).abs() < 1e-15);

        let cst = HullFunction::constant(2, c(-2.5, 0.0));
        let s = seminorm_salpha(&model, &cst, &[0, 0], &grid).unwrap();
        assert!((s.lower - 2.5).abs() < 1e-15);
        assert!((s.upper - 2.5).abs() < 1e-15);

        // φ = cos ω₁, α = (1,0): |−sin ω₁| sups to 1; 64-point grid hits π/2.
        let grid64 = OmegaGrid::new(2, 64).unwrap();
        let cosw = HullFunction::cosine(2, vec![1, 0]).unwrap();
        let s = seminorm_salpha(&model, &cosw, &[1, 0], &grid64).unwrap();
        assert!(s.lower > 1.0 - 1e-3 && s.lower <= 1.0 + 1e-12);
        assert!((s.upper - 1.0).abs() < 1e-15);
        assert!(s.lower <= s.upper + 1e-15);
    }

    #[test]
    fn seminorm_empty_grid_is_error() {
        let model = HullModel::identity(1);
        let phi = HullFunction::constant(1, c(1.0, 0.0));
        assert!(OmegaGrid::new(1, 0).is_err());
        let _ = (model, phi);
    }

    #[test]
    fn seminorm_of_derivatives_finite_lemma1() {
        // Orbit restrictions of finite series lie in BC^∞: every |β| ≤ 3
        // derivative has finite seminorm.
        let model = kronecker_sqrt2();
        let grid = OmegaGrid::new(2, 8).unwrap();
        let phi = HullFunction::from_modes(
            2,
            [(vec![1, 0], c(0.5, 0.0)), (vec![-1, 0], c(0.5, 0.0))],
        )
        .unwrap();
        for b in 0..=3 {
            let s = seminorm_salpha(&model, &phi, &[b], &grid).unwrap();
            assert!(s.upper.is_finite());
            assert!(s.lower <= s.upper + 1e-12);
        }
    }

    #[test]
    fn translation_is_isometry_on_upper_seminorm() {
        let model = kronecker_sqrt2();
        let phi = HullFunction::from_modes(
            2,
            [(vec![2, 1], c(0.3, 0.4)), (vec![0, -1], c(-0.2, 0.1))],
        )
        .unwrap();
        let shifted = phi.translate(&model, &[1.234]).unwrap();
        assert!((phi.coeff_l1() - shifted.coeff_l1()).abs() < 1e-14);
    }

    #[test]
    fn stabilizer_kronecker_free() {
        let model = kronecker_sqrt2();
        let rep = stabilizer_report(&model, 1_000_000);
        assert!(rep.free_up_to_bound, "{}", rep.note);
    }

    #[test]
    fn stabilizer_identity_lattice() {
        let model = HullModel::identity(1);
        let rep = stabilizer_report(&model, 1000);
        assert!(!rep.free_up_to_bound);
        assert_eq!(rep.generators.len(), 1);
        assert!((rep.generators[0][0].abs() - TAU).abs() < 1e-9);
    }

    #[test]
    fn stabilizer_zero_matrix() {
        let model = HullModel::new(2, 1, vec![vec![0.0], vec![0.0]]).unwrap();
        let rep = stabilizer_report(&model, 1000);
        assert!(!rep.free_up_to_bound);
        assert_eq!(rep.kernel_dim, 1);
    }

    #[test]
    fn stabilizer_identity2_lattice() {
        let model = HullModel::identity(2);
        let rep = stabilizer_report(&model, 1000);
        assert!(!rep.free_up_to_bound);
        assert!(!rep.generators.is_empty());
    }

    #[test]
    fn product_grows_support_and_truncate() {
        let a = HullFunction::harmonic(2, vec![1, 0]).unwrap();
        let b = HullFunction::harmonic(2, vec![1, 0]).unwrap();
        let ab = a.mul(&b);
        let (m, _) = ab.modes().next().unwrap();
        assert_eq!(m, &vec![2, 0]);
        assert!(ab.truncate(1).is_zero());
    }
}
