//! Closed-form evaluation of the oscillatory moments
//!
//! ```text
//! J_r(γ)      = ∫₀¹ s^r e^{isγ} ds
//! M_{p,q}(u,v) = ∫₀¹ dt ∫₀^t ds  s^p t^q e^{i(su + tv)}
//! ```
//!
//! which carry every (t,s) flux integral in this crate.  The elementary
//! antiderivatives have removable singularities as the phases vanish, so
//! each evaluator switches to a power series in the small-phase region and
//! to well-conditioned closed forms outside it.  `M_{0,0}` doubles as the
//! triangle-flux kernel: ∫₀¹dt∫₀¹ds s e^{i(sα+stβ)} = M_{0,0}(β, α).

use crate::numerics::gauss_legendre_on;
use crate::C64;

/// Arguments below this magnitude use the power series.
const SERIES_CUT: f64 = 8.0;

/// `J_r(γ) = ∫₀¹ s^r e^{isγ} ds`.
pub fn exp_moment(r: usize, gamma: f64) -> C64 {
    if gamma.abs() <= SERIES_CUT {
        exp_moment_series(r, gamma)
    } else {
        exp_moment_quadrature(r, gamma)
    }
}

/// Σ_k (iγ)^k / (k! (r+k+1)) — entire, truncated at 1e-18 relative.
fn exp_moment_series(r: usize, gamma: f64) -> C64 {
    let ig = C64::new(0.0, gamma);
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term / (r as f64 + 1.0);
    for k in 1..120 {
        term *= ig / k as f64;
        let contrib = term / (r + k + 1) as f64;
        sum += contrib;
        if contrib.norm() < 1e-18 * sum.norm().max(1e-30) {
            break;
        }
    }
    sum
}

/// Gauss–Legendre evaluation, order scaled to the phase; exact to machine
/// precision once the rule resolves the oscillation.
fn exp_moment_quadrature(r: usize, gamma: f64) -> C64 {
    let order = (gamma.abs() as usize + 24).min(220);
    let (xs, ws) = gauss_legendre_on(order, 0.0, 1.0);
    let mut acc = C64::new(0.0, 0.0);
    for (&s, &w) in xs.iter().zip(&ws) {
        acc += C64::new(0.0, s * gamma).exp() * s.powi(r as i32) * w;
    }
    acc
}

/// `M_{p,q}(u,v)` over the triangle `0 ≤ s ≤ t ≤ 1`.
pub fn triangle_moment(p: usize, q: usize, u: f64, v: f64) -> C64 {
    if u.abs() <= SERIES_CUT {
        // ∫₀^t s^p e^{isu} ds = t^{p+1} Σ_k (itu)^k / (k!(p+k+1)), so
        // M = Σ_k (iu)^k/(k!(p+k+1)) J_{p+q+k+1}(v).
        let iu = C64::new(0.0, u);
        let mut pow = C64::new(1.0, 0.0);
        let mut sum = exp_moment(p + q + 1, v) / (p as f64 + 1.0);
        for k in 1..120 {
            pow *= iu / k as f64;
            let contrib = pow / (p + k + 1) as f64 * exp_moment(p + q + k + 1, v);
            sum += contrib;
            if pow.norm() / (p + k + 1) as f64 * 0.5 < 1e-18 * sum.norm().max(1e-30) {
                break;
            }
        }
        sum
    } else {
        // Integration by parts in s: ∫₀^t s^p e^{isu} ds = e^{itu} P_p(t) + C_p
        // with P_p(t) = t^p/(iu) − (p/(iu)) P_{p−1}(t), C_p = −(p/(iu)) C_{p−1}.
        let iu_inv = C64::new(1.0, 0.0) / C64::new(0.0, u);
        let mut poly = vec![C64::new(0.0, 0.0); p + 1]; // P_p coefficients in t
        let mut cconst;
        poly[0] = iu_inv;
        cconst = -iu_inv;
        for deg in 1..=p {
            let mut next = vec![C64::new(0.0, 0.0); p + 1];
            next[deg] = iu_inv;
            for (r, c) in poly.iter().enumerate() {
                next[r] -= iu_inv * deg as f64 * c;
            }
            cconst = -iu_inv * deg as f64 * cconst;
            poly = next;
        }
        // M = Σ_r poly[r] J_{q+r}(u+v) + C_p J_q(v)
        let mut acc = cconst * exp_moment(q, v);
        for (r, c) in poly.iter().enumerate() {
            if c.norm() > 0.0 {
                acc += c * exp_moment(q + r, u + v);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: tensorized Gauss–Legendre over the triangle.
    fn triangle_moment_oracle(p: usize, q: usize, u: f64, v: f64) -> C64 {
        let order = ((u.abs() + v.abs()) as usize + 40).min(200);
        let (ts, tw) = gauss_legendre_on(order, 0.0, 1.0);
        let mut acc = C64::new(0.0, 0.0);
        for (&t, &wt) in ts.iter().zip(&tw) {
            let (ss, sw) = gauss_legendre_on(order, 0.0, t);
            for (&s, &ws) in ss.iter().zip(&sw) {
                acc += C64::new(0.0, s * u + t * v).exp()
                    * s.powi(p as i32)
                    * t.powi(q as i32)
                    * (wt * ws);
            }
        }
        acc
    }

    #[test]
    fn exp_moment_reference_values() {
        // J_0(0) = 1, J_r(0) = 1/(r+1)
        assert!((exp_moment(0, 0.0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((exp_moment(3, 0.0) - C64::new(0.25, 0.0)).norm() < 1e-15);
        // J_0(γ) = (e^{iγ}−1)/(iγ)
        for &g in &[0.5, 3.0, 12.0, 45.0, -7.3] {
            let closed = (C64::new(0.0, g).exp() - 1.0) / C64::new(0.0, g);
            assert!(
                (exp_moment(0, g) - closed).norm() < 1e-13,
                "J_0({g}) mismatch"
            );
        }
        // J_1(γ) via integration by parts
        for &g in &[0.3, 2.0, 9.5, 30.0] {
            let e = C64::new(0.0, g).exp();
            let ig = C64::new(0.0, g);
            let closed = e / ig - (e - 1.0) / (ig * ig);
            assert!(
                (exp_moment(1, g) - closed).norm() < 1e-13,
                "J_1({g}) mismatch"
            );
        }
    }

    #[test]
    fn exp_moment_conjugate_symmetry() {
        for &g in &[0.1, 1.7, 6.0, 14.0] {
            for r in 0..5 {
                let a = exp_moment(r, g);
                let b = exp_moment(r, -g);
                assert!((a.conj() - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn triangle_moment_against_quadrature_oracle() {
        let args = [
            (0.0, 0.0),
            (1e-6, 2.0),
            (2.0, 1e-6),
            (1e-5, 1e-5),
            (0.3, -0.7),
            (4.0, 3.0),
            (7.9, -8.1), // straddles the series cut
            (12.0, 5.0),
            (25.0, -19.0),
            (-9.0, 9.0), // u+v ≈ 0 in the by-parts branch
        ];
        for (p, q) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 2)] {
            for &(u, v) in &args {
                let got = triangle_moment(p, q, u, v);
                let want = triangle_moment_oracle(p, q, u, v);
                assert!(
                    (got - want).norm() < 1e-11,
                    "M_{{{p},{q}}}({u},{v}): got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn triangle_moment_small_phase_limits() {
        // M_{0,0}(0,0) = area of the triangle = 1/2
        assert!((triangle_moment(0, 0, 0.0, 0.0) - C64::new(0.5, 0.0)).norm() < 1e-15);
        // M_{1,0}(0,0) = ∫∫ s = 1/6, M_{0,1}(0,0) = ∫∫ t = 1/3
        assert!((triangle_moment(1, 0, 0.0, 0.0) - C64::new(1.0 / 6.0, 0.0)).norm() < 1e-15);
        assert!((triangle_moment(0, 1, 0.0, 0.0) - C64::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn flux_kernel_identity() {
        // ∫₀¹dt∫₀¹ds s e^{i(sα+stβ)} equals M_{0,0}(β, α): substitute σ = s,
        // τ = st and check against direct quadrature of the original form.
        let (xs, ws) = gauss_legendre_on(80, 0.0, 1.0);
        for &(alpha, beta) in &[(0.7, -1.3), (3.0, 0.5), (1e-6, 4.0), (5.0, 1e-7)] {
            let mut direct = C64::new(0.0, 0.0);
            for (&t, &wt) in xs.iter().zip(&ws) {
                for (&s, &wsw) in xs.iter().zip(&ws) {
                    direct += C64::new(0.0, s * alpha + s * t * beta).exp() * s * (wt * wsw);
                }
            }
            let closed = triangle_moment(0, 0, beta, alpha);
            assert!(
                (direct - closed).norm() < 1e-12,
                "α={alpha}, β={beta}: {direct} vs {closed}"
            );
        }
    }
}
