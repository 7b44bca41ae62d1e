use magweyl_core::algebra::*;
use magweyl_core::flux::{quasi_periodic_cos_field, scaled_flux};
use magweyl_core::hull::{HullFunction, HullModel, HullPoint, OmegaGrid};
use magweyl_core::symbols::{Atom, GridSpec, Realization, Symbol};
use magweyl_core::C64;

fn main() {
    let model = HullModel::identity(2);
    let field = quasi_periodic_cos_field(2, 2, 1.0);
    let grid = GridSpec::new(8.0, 16, 2, Realization::Position).unwrap();
    let wgrid = OmegaGrid::new(2, 16).unwrap();
    let hbar = 1.0;
    let c = |re: f64| C64::new(re, 0.0);
    let _ = c;
    let f1 = Symbol::from_atoms(
        Realization::Position,
        vec![Atom::gaussian(
            HullFunction::cosine(2, vec![1, 0]).unwrap(),
            0.5,
            vec![0.0, 0.0],
            vec![0.3, 0.0],
        )
        .unwrap()],
    )
    .unwrap();
    let f2 = Symbol::from_atoms(
        Realization::Position,
        vec![Atom::gaussian(
            HullFunction::constant(2, C64::new(1.0, 0.0)),
            0.5,
            vec![0.2, -0.3],
            vec![0.0, 0.2],
        )
        .unwrap()],
    )
    .unwrap();

    let prod = compose_magnetic(&model, &field, hbar, &f1, &f2, &wgrid, &grid).unwrap();
    let s = prod.sampled().unwrap();

    // brute force at a few (ω, x)
    let omegas = [HullPoint::zero(2), HullPoint::new(vec![1.1, 2.3])];
    for w in &omegas {
        for &xf in &[100usize, 137, 60] {
            let x = grid.point(xf);
            let mut acc = C64::new(0.0, 0.0);
            for yf in 0..grid.len() {
                let y = grid.point(yf);
                let xmy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                if xmy.iter().any(|v| *v < -8.0 || *v >= 8.0) {
                    continue;
                }
                let z1: Vec<f64> = y.iter().zip(&x).map(|(a, b)| 0.5 * hbar * (a - b)).collect();
                let z2: Vec<f64> = y.iter().map(|a| 0.5 * hbar * a).collect();
                let w1 = model.act(w, &z1).unwrap();
                let w2 = model.act(w, &z2).unwrap();
                let lam = scaled_flux(&model, &field, hbar, &x, &y, 0).unwrap().at(w);
                acc += f1.evaluate(&w1, &y)
                    * f2.evaluate(&w2, &xmy)
                    * C64::new(0.0, -hbar * lam).exp();
            }
            acc *= grid.weight();
            let got = s.value_at_index(w, xf);
            println!(
                "w={:?} x={:?}: brute {:+.6e}{:+.6e}i  compose {:+.6e}{:+.6e}i  diff {:.2e}",
                &w.angles()[..], &x[..], acc.re, acc.im, got.re, got.im, (acc - got).norm()
            );
        }
    }
}
