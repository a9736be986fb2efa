//! Shared fixtures for the criterion benches.

use cascade_core::{Complex64, FlatFn, FlatTerm, ModeFn};

/// `terms` flat terms with spread rates, powers and oscillations.
pub fn sample_fn(terms: usize) -> FlatFn {
    let list = (0..terms)
        .map(|i| {
            let i = i as i64;
            let coeff = Complex64::new(1.0 / (1 + i) as f64, 0.5 / (2 + i) as f64);
            let mut t = FlatTerm::flat(coeff, 1 + i % 3, 1 + i % 2);
            t.t_pow = (i % 4) as i32;
            t.osc = 37 * i - 100;
            t
        })
        .collect();
    FlatFn::from_terms(list)
}

/// `modes` consecutive modes around 0, each carrying a small sum.
pub fn sample_modes(modes: i64) -> ModeFn {
    ModeFn::from_entries((0..modes).map(|j| (j - modes / 2, sample_fn(3).scale(Complex64::new(0.1, 0.0)))))
}
