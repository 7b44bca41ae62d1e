//! Brute-force flux evaluation: adaptive 2-D quadrature of the parametrized
//! flux integrand with the field evaluated pointwise through the hull
//! action.  Entirely independent of the per-mode closed forms in the parent
//! module — this is the oracle they are tested against.

use crate::error::{Error, Result};
use crate::flux::MagneticField;
use crate::hull::{HullModel, HullPoint};
use crate::numerics::gauss_legendre_on;

/// `Γ^{B_ω}⟨a,b,c⟩` by adaptive quadrature, absolute error ≤ `tol`.
pub fn triangle_flux_oracle(
    model: &HullModel,
    field: &MagneticField,
    a: &[f64],
    b: &[f64],
    c: &[f64],
    omega: &HullPoint,
    tol: f64,
) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::invalid("oracle tolerance must be positive"));
    }
    let n = field.action_dim();
    let x: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
    let y: Vec<f64> = c.iter().zip(b).map(|(p, q)| p - q).collect();
    let base = model.act(omega, a)?;

    // integrand(t, s) = Σ_{j≠k} x_j y_k · s · B^{jk}(θ_{sx+sty}[ω̃])
    let integrand = |t: f64, s: f64| -> f64 {
        let shift: Vec<f64> = (0..n).map(|l| s * x[l] + s * t * y[l]).collect();
        let point = model
            .act(&base, &shift)
            .expect("dimensions checked on entry");
        let mut acc = 0.0;
        for (&(j, k), func) in field.upper_components() {
            let v = func.evaluate(&point).re;
            acc += (x[j] * y[k] - x[k] * y[j]) * s * v;
        }
        acc
    };

    adaptive_square(&integrand, 0.0, 1.0, 0.0, 1.0, tol, 0)
}

/// Recursive panel rule: accept a cell when the 4×4 and 8×8 tensor
/// Gauss–Legendre values agree within the cell's share of the tolerance.
fn adaptive_square(
    f: &dyn Fn(f64, f64) -> f64,
    t0: f64,
    t1: f64,
    s0: f64,
    s1: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let coarse = panel(f, t0, t1, s0, s1, 4);
    let fine = panel(f, t0, t1, s0, s1, 8);
    if (coarse - fine).abs() <= tol {
        return Ok(fine);
    }
    if depth >= 20 {
        return Err(Error::numeric(
            "triangle flux oracle did not converge within refinement budget",
        ));
    }
    let tm = 0.5 * (t0 + t1);
    let sm = 0.5 * (s0 + s1);
    let q = 0.25 * tol;
    Ok(adaptive_square(f, t0, tm, s0, sm, q, depth + 1)?
        + adaptive_square(f, t0, tm, sm, s1, q, depth + 1)?
        + adaptive_square(f, tm, t1, s0, sm, q, depth + 1)?
        + adaptive_square(f, tm, t1, sm, s1, q, depth + 1)?)
}

fn panel(f: &dyn Fn(f64, f64) -> f64, t0: f64, t1: f64, s0: f64, s1: f64, order: usize) -> f64 {
    let (ts, tw) = gauss_legendre_on(order, t0, t1);
    let (ss, sw) = gauss_legendre_on(order, s0, s1);
    let mut acc = 0.0;
    for (&t, &wt) in ts.iter().zip(&tw) {
        for (&s, &ws) in ss.iter().zip(&sw) {
            acc += wt * ws * f(t, s);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{constant_field, MagneticField};

    #[test]
    fn oracle_trivial_cases() {
        let model = HullModel::identity(2);
        let w = HullPoint::zero(2);

        let zero = MagneticField::zero(2, 2);
        let v =
            triangle_flux_oracle(&model, &zero, &[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &w, 1e-10)
                .unwrap();
        assert!(v.abs() < 1e-12);

        // constant field over the standard triangle: signed area 1/2
        let constant = constant_field(2, 2, 1.0);
        let v = triangle_flux_oracle(
            &model,
            &constant,
            &[0.0, 0.0],
            &[1.0, 0.0],
            &[0.0, 1.0],
            &w,
            1e-10,
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-9);

        // degenerate triangle a = b → 0
        let v = triangle_flux_oracle(
            &model,
            &constant,
            &[0.3, 0.3],
            &[0.3, 0.3],
            &[1.0, 1.0],
            &w,
            1e-10,
        )
        .unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_bad_tolerance() {
        let model = HullModel::identity(2);
        let w = HullPoint::zero(2);
        let f = MagneticField::zero(2, 2);
        assert!(
            triangle_flux_oracle(&model, &f, &[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &w, 0.0)
                .is_err()
        );
    }
}
