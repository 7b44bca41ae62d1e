//! Small numerical utilities shared across modules: Gauss–Legendre rules,
//! n-dimensional FFT wrappers, flat-index helpers and a deterministic
//! largest-singular-value estimator.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::C64;

/// Gauss–Legendre nodes and weights on [-1, 1]; memoized per thread since
/// the flux kernels request the same orders millions of times.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    thread_local! {
        static CACHE: std::cell::RefCell<std::collections::HashMap<usize, (Vec<f64>, Vec<f64>)>> =
            std::cell::RefCell::new(std::collections::HashMap::new());
    }
    CACHE.with(|c| {
        c.borrow_mut()
            .entry(order)
            .or_insert_with(|| gauss_legendre_uncached(order))
            .clone()
    })
}

fn gauss_legendre_uncached(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order;
    for i in 0..(n + 1) / 2 {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = -p / dp;
            x += dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Row-major flat index of `idx` in an n-dim grid with `pts` points per axis.
#[inline]
pub fn flat_index(idx: &[usize], pts: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * pts + i)
}

/// Inverse of [`flat_index`].
#[inline]
pub fn unflatten(mut flat: usize, dim: usize, pts: usize) -> Vec<usize> {
    let mut idx = vec![0usize; dim];
    for k in (0..dim).rev() {
        idx[k] = flat % pts;
        flat /= pts;
    }
    idx
}

/// All multi-indices `0 ≤ idx_i < pts` in row-major order.
pub fn multi_indices(dim: usize, pts: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = pts.pow(dim as u32);
    (0..total).map(move |flat| unflatten(flat, dim, pts))
}

/// Multi-indices `α ∈ N^dim` with `|α| ≤ max_total`, lexicographic.
pub fn multi_indices_up_to(dim: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    loop {
        if cur.iter().sum::<usize>() <= max_total {
            out.push(cur.clone());
        }
        let mut k = dim;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] <= max_total {
                break;
            }
            cur[k] = 0;
        }
    }
}

/// In-place n-dimensional FFT over a row-major hypercube of side `pts`.
/// `inverse` applies the conjugate transform *without* the 1/N factor.
pub fn fft_nd(data: &mut [C64], dim: usize, pts: usize, inverse: bool) {
    assert_eq!(data.len(), pts.pow(dim as u32));
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn Fft<f64>> = if inverse {
        planner.plan_fft_inverse(pts)
    } else {
        planner.plan_fft_forward(pts)
    };
    let total = data.len();
    let mut scratch = vec![C64::new(0.0, 0.0); pts];
    // Transform along each axis in turn.
    for axis in 0..dim {
        let stride = pts.pow((dim - 1 - axis) as u32);
        let block = stride * pts;
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                for i in 0..pts {
                    scratch[i] = data[base + off + i * stride];
                }
                fft.process(&mut scratch);
                for i in 0..pts {
                    data[base + off + i * stride] = scratch[i];
                }
            }
        }
    }
}

/// Largest singular value of a dense row-major `dim×dim` complex matrix by
/// power iteration on `M†M`, deterministic start, relative tolerance 1e-8.
pub fn spectral_norm(m: &[C64], dim: usize) -> f64 {
    assert_eq!(m.len(), dim * dim);
    if dim == 0 {
        return 0.0;
    }
    // Deterministic pseudo-random start vector keeps runs reproducible.
    let mut v: Vec<C64> = (0..dim)
        .map(|i| {
            let t = (i as f64 * 0.754877666 + 0.1).fract();
            C64::new(1.0 + t, 0.5 - t)
        })
        .collect();
    normalize(&mut v);
    let mut lambda = 0.0_f64; // Rayleigh quotient of M†M → σ_max²
    let mut tmp = vec![C64::new(0.0, 0.0); dim];
    let mut u = vec![C64::new(0.0, 0.0); dim];
    for _ in 0..1000 {
        matvec(m, dim, &v, &mut tmp);
        matvec_adjoint(m, dim, &tmp, &mut u);
        // λ = <v, M†Mv> = ‖Mv‖² for unit v.
        let new_lambda = norm2(&tmp);
        let un = norm2(&u).sqrt();
        if un == 0.0 {
            return 0.0;
        }
        std::mem::swap(&mut v, &mut u);
        normalize(&mut v);
        if (new_lambda - lambda).abs() <= 1e-16 * new_lambda.max(1e-300)
            || (new_lambda.sqrt() - lambda.sqrt()).abs() <= 1e-9 * new_lambda.sqrt()
        {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda.sqrt()
}

pub fn matvec(m: &[C64], dim: usize, v: &[C64], out: &mut [C64]) {
    for i in 0..dim {
        let row = &m[i * dim..(i + 1) * dim];
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in row.iter().zip(v) {
            acc += a * b;
        }
        out[i] = acc;
    }
}

pub fn matvec_adjoint(m: &[C64], dim: usize, v: &[C64], out: &mut [C64]) {
    for o in out.iter_mut() {
        *o = C64::new(0.0, 0.0);
    }
    for i in 0..dim {
        let row = &m[i * dim..(i + 1) * dim];
        let vi = v[i];
        for (j, a) in row.iter().enumerate() {
            out[j] += a.conj() * vi;
        }
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

fn normalize(v: &mut [C64]) {
    let n = norm2(v).sqrt();
    if n > 0.0 {
        for c in v.iter_mut() {
            *c /= n;
        }
    }
}

/// Least-squares solution of `A x ≈ b` (rows of `a` are observations) via
/// ridge-stabilized normal equations and Gaussian elimination.  Sized for
/// the small fitting problems in this crate (tens of unknowns).
pub fn lstsq(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let rows = a.len();
    assert_eq!(rows, b.len());
    if rows == 0 {
        return vec![];
    }
    let cols = a[0].len();
    let mut ata = vec![vec![0.0; cols]; cols];
    let mut atb = vec![0.0; cols];
    for (row, &bi) in a.iter().zip(b) {
        for i in 0..cols {
            atb[i] += row[i] * bi;
            for j in 0..cols {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let ridge = 1e-12
        * (0..cols)
            .map(|i| ata[i][i])
            .fold(0.0_f64, f64::max)
            .max(1e-300);
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += ridge;
    }
    solve_dense(&mut ata, &mut atb);
    atb
}

/// In-place Gaussian elimination with partial pivoting; `b` becomes `x`.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        if diag.abs() < 1e-300 {
            continue;
        }
        for row in (col + 1)..n {
            let factor = a[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let diag = a[col][col];
        if diag.abs() < 1e-300 {
            b[col] = 0.0;
            continue;
        }
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col][k] * b[k];
        }
        b[col] = acc / diag;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_recovers_plane() {
        // b = 2 x0 - 3 x1 + 0.5
        let a: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let x0 = (i as f64 * 0.37).sin();
                let x1 = (i as f64 * 0.11).cos();
                vec![x0, x1, 1.0]
            })
            .collect();
        let b: Vec<f64> = a.iter().map(|r| 2.0 * r[0] - 3.0 * r[1] + 0.5).collect();
        let x = lstsq(&a, &b);
        assert!((x[0] - 2.0).abs() < 1e-6);
        assert!((x[1] + 3.0).abs() < 1e-6);
        assert!((x[2] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (xs, ws) = gauss_legendre_on(8, 0.0, 1.0);
        // ∫₀¹ x⁵ dx = 1/6
        let v: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(5)).sum();
        assert!((v - 1.0 / 6.0).abs() < 1e-14);
        // ∫₀¹ cos x dx = sin 1
        let v: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.cos()).sum();
        assert!((v - 1.0_f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn fft_roundtrip() {
        let pts = 8;
        let dim = 2;
        let mut data: Vec<C64> = (0..pts * pts)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let orig = data.clone();
        fft_nd(&mut data, dim, pts, false);
        fft_nd(&mut data, dim, pts, true);
        let scale = (pts * pts) as f64;
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_norm_known_cases() {
        // diag(3, 1): σ_max = 3
        let m = [
            C64::new(3.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ];
        assert!((spectral_norm(&m, 2) - 3.0).abs() < 1e-7);

        // [[0, 2i], [0, 0]]: σ_max = 2
        let m = [
            C64::new(0.0, 0.0),
            C64::new(0.0, 2.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ];
        assert!((spectral_norm(&m, 2) - 2.0).abs() < 1e-7);

        // Random-ish 3x3 against the Frobenius bound σ ≤ ‖·‖_F ≤ √3 σ
        let m: Vec<C64> = (0..9)
            .map(|i| C64::new((i as f64).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let s = spectral_norm(&m, 3);
        let frob: f64 = m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!(s <= frob + 1e-9 && s >= frob / 3.0_f64.sqrt() - 1e-9);
    }

    #[test]
    fn multi_index_helpers() {
        let idx = vec![1usize, 2, 3];
        let flat = flat_index(&idx, 4);
        assert_eq!(unflatten(flat, 3, 4), idx);
        assert_eq!(multi_indices(2, 3).count(), 9);
        assert_eq!(multi_indices_up_to(2, 2).len(), 6);
    }
}
