use normform_core::hypersurface::FormalMap;
use normform_core::normalizer::{catalog, Component, Unknown};
use normform_core::poly::HoloPoly;
use normform_core::scalar::rat;
use normform_core::ModelSpec;
use rand::seq::SliceRandom;
use rand::Rng;

/// Admissible unknowns of plain degree at most 4.
pub fn small_unknowns(model: &ModelSpec) -> Vec<Unknown> {
    let g = model.grading();
    let top = 4 * g.x + model.k0();
    catalog(model, top).into_iter().filter(|u| u.monomial.degree() <= 4).collect()
}

/// Random jets-normalized admissible map with 1 to 5 terms, coefficients `p/q`, `|p|, q <= 4`.
pub fn random_map<R: Rng>(model: &ModelSpec, pool: &[Unknown], order: u32, rng: &mut R) -> FormalMap {
    let n = model.n();
    let mut f: Vec<HoloPoly> = (0..n).map(|k| HoloPoly::z(n, k)).collect();
    let mut g = HoloPoly::w(n);
    let count = rng.gen_range(1..=5);
    for u in pool.choose_multiple(rng, count) {
        let mut p = 0;
        while p == 0 {
            p = rng.gen_range(-4..=4);
        }
        let q = rng.gen_range(1..=4);
        let term = HoloPoly::term(n, u.monomial.clone(), u.scalar().scale(&rat(p, q)));
        match u.component {
            Component::F(k) => f[k].add_assign(&term),
            Component::G => g.add_assign(&term),
        }
    }
    FormalMap::new(f, g, order).expect("admissible terms keep the linear part")
}

/// Fleet of models with their working orders `2 k0 + 2`.
pub fn fleet() -> Vec<(String, ModelSpec, u32)> {
    [(1, 0, 2), (2, 0, 2), (1, 1, 3)]
        .into_iter()
        .map(|(n, s, k0)| {
            let m = ModelSpec::hermitian(n, s, k0).expect("fleet model is valid");
            (format!("N={n} s={s} k0={k0}"), m, 2 * k0 + 2)
        })
        .collect()
}
