use num_complex::Complex64;

use super::*;
use crate::cascade::{iterate, seed_x1, step, CascadeConfig, ConstructionState, StepConfig};
use crate::flatfn::{antiderivative_values, FlatFn, FlatTerm, Grid, QuadratureOptions};
use crate::spectral::{norm, residual, ModeFn, NonlinearitySpec, NormSpace, Spatial, TimeMode};

fn small_state() -> ConstructionState {
    let cfg = CascadeConfig::new(NonlinearitySpec::cubic(1.0), Spatial::L2s { s: -2.0 }, 2);
    iterate(&cfg, 3).unwrap()
}

#[test]
fn multiplier_examples() {
    assert_eq!(make_cutoff(CutoffFamily::Sharp, 5).value(3), 1.0);
    assert_eq!(make_cutoff(CutoffFamily::Sharp, 5).value(6), 0.0);
    assert!((make_cutoff(CutoffFamily::Fejer, 5).value(3) - 0.4).abs() < 1e-15);
    assert_eq!(make_cutoff(CutoffFamily::Fejer, 5).value(5), 0.0);
    let bump = make_cutoff(CutoffFamily::SmoothBump, 10);
    assert_eq!(bump.value(0), 1.0);
    assert_eq!(bump.value(10), 1.0);
    assert!(bump.value(15) > 0.0 && bump.value(15) < 1.0);
    assert_eq!(bump.value(20), 0.0);
    assert!((plateau(1.5) - 0.5).abs() < 1e-15);
}

#[test]
fn plateau_is_monotone_on_the_transition() {
    let mut prev = 1.0;
    for i in 0..=1000 {
        let v = plateau(1.0 + i as f64 / 1000.0);
        assert!(v <= prev && (0.0..=1.0).contains(&v));
        prev = v;
    }
}

#[test]
fn perturbed_family_is_a_cutoff_sequence() {
    let family = CutoffFamily::Perturbed { seed: 11 };
    let mut prev_amp = f64::INFINITY;
    for cut in (0..=10).map(|e| 1i64 << e).chain([3, 100, 1000]) {
        let c = make_cutoff(family, cut);
        let amp = perturbation_amplitude(cut);
        for n in -cut - 3..=cut + 3 {
            let v = c.value(n);
            if n.abs() > cut {
                assert_eq!(v, 0.0);
            } else {
                assert!((v - 1.0).abs() <= amp && v.abs() <= family.uniform_bound());
            }
        }
        assert_eq!(c.to_map().keys().map(|n| n.abs()).max().unwrap_or(0) <= c.radius(), true);
        assert_eq!(c.value(1), make_cutoff(family, cut).value(1), "deterministic per (N, n)");
        prev_amp = prev_amp.min(amp);
    }
    // amplitude decays to zero, so m_N(n) → 1 pointwise
    let amps: Vec<f64> = [1e3, 1e6, 1e12, 9e18].iter().map(|&n| perturbation_amplitude(n as i64)).collect();
    assert!(amps.windows(2).all(|w| w[1] < w[0]) && amps[3] < 0.25);
}

#[test]
fn applying_cutoffs() {
    let f = FlatFn::monomial(FlatTerm::flat(Complex64::new(2.0, 0.0), 1, 1));
    let v = ModeFn::from_entries([(10, f.clone()), (-12, f.clone()), (30, f.clone())]);
    assert!(apply_cutoff(&v, &make_cutoff(CutoffFamily::Sharp, 9)).is_zero());
    assert_eq!(apply_cutoff(&v, &make_cutoff(CutoffFamily::Sharp, 30)), v);
    let once = apply_cutoff(&v, &make_cutoff(CutoffFamily::Sharp, 12));
    assert_eq!(apply_cutoff(&once, &make_cutoff(CutoffFamily::Sharp, 12)), once);
    assert_eq!(once.support(), vec![-12, 10]);
    let l1 = NormSpace::lp(1.0, TimeMode::C0);
    let grid = Grid::default();
    let perturbed = make_cutoff(CutoffFamily::Perturbed { seed: 3 }, 40);
    let lhs = norm(&apply_cutoff(&v, &perturbed), &l1, &grid).unwrap().estimate;
    let rhs = norm(&v, &l1, &grid).unwrap().estimate * 2.0;
    assert!(lhs <= rhs * (1.0 + 1e-12));
}

#[test]
fn ode_crosscheck_confirms_one_step() {
    for spec in [NonlinearitySpec::cubic(1.0), NonlinearitySpec::quad_square(1.0)] {
        let cfg = StepConfig::new(spec, Spatial::L2s { s: -1.0 }, 4, 0.25);
        let out = step(&seed_x1(), &cfg).unwrap();
        let err = ode_crosscheck(&out.y, &out.g, &spec, 1e-4).unwrap();
        assert!(err <= 1e-6, "{:?}: {err:e}", spec.variant);
        let mut bad = out.g.clone();
        bad.add_to(out.report.m_floor * 100, &FlatFn::constant(Complex64::new(1e-3, 0.0)));
        let mut bad2 = out.g.clone();
        let mode = out.g.support()[0];
        bad2.add_to(mode, &FlatFn::constant(Complex64::new(1e-3, 0.0)));
        assert!(ode_crosscheck(&out.y, &bad2, &spec, 1e-4).unwrap() >= 1e-4);
        assert!(ode_crosscheck(&out.y, &bad, &spec, 1e-4).unwrap() >= 1e-4);
    }
    let spec = NonlinearitySpec::cubic(1.0);
    assert_eq!(ode_crosscheck(&ModeFn::zero(), &ModeFn::zero(), &spec, 1e-4).unwrap(), 0.0);
    assert!(ode_crosscheck(&ModeFn::zero(), &ModeFn::zero(), &spec, 1e-2).is_err());
}

#[test]
fn integral_equation_on_constructed_stages() {
    let state = small_state();
    let spec = state.config.spec;
    let ts: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
    for st in &state.stages {
        let defect = integral_equation_check(&st.x, &st.f, &spec, &ts).unwrap();
        assert!(defect <= 1e-9, "stage {}: {defect:e}", st.index);
        assert_eq!(integral_equation_check(&st.x, &st.f, &spec, &[0.0]).unwrap(), 0.0);
    }
    // dropping the forcing leaves ‖∫f‖
    let st = &state.stages[0];
    let defect = integral_equation_check(&st.x, &ModeFn::zero(), &spec, &ts).unwrap();
    let f0 = antiderivative_values(st.f.get(0).unwrap(), &ts, &QuadratureOptions::default()).unwrap();
    let expect = f0.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(defect >= 0.5 * expect && expect > 0.1, "{defect} vs {expect}");
}

#[test]
fn convergence_table_and_finite_checks() {
    let state = small_state();
    let grid = Grid::default();
    let cuts = [32, 1024, 4096];
    let report = cutoff_convergence(&state, &CutoffFamily::all(5), &cuts, state.config.space, &grid).unwrap();
    assert_eq!(report.rows.len(), 4 * cuts.len() * state.stages.len());
    report.check_finite().unwrap();
    for r in report.rows.iter().filter(|r| r.family == "sharp" && r.cut >= r.support_radius) {
        assert_eq!(r.deviation.bound, 0.0);
    }
    assert!(report.rows.iter().filter(|r| r.stage == 3).all(|r| r.increment.is_none()));
    let csv = report.to_csv();
    assert!(csv.starts_with("family,N,k,deviation,increment,fitted_C\n"));
    assert_eq!(csv.lines().count(), report.rows.len() + 1);
    let gap = designated_scaling_gap(&state, &make_cutoff(CutoffFamily::Fejer, 64), &grid).unwrap();
    assert!(gap <= 1e-8, "{gap:e}");
}

#[test]
fn verification_bundle_detects_a_perturbed_coefficient() {
    let state = small_state();
    let opts = VerifyOptions { cutoffs: vec![32, 4096], ..VerifyOptions::default() };
    let report = verify_construction(&state, &opts).unwrap();
    assert!(report.passed(), "{:?}", report.first_failure());
    assert!(report.checks.iter().any(|c| c.name.starts_with("ode") && !c.skipped));
    let mut bad = state.clone();
    let x = &mut bad.stages[1].x;
    let (n, f) = x.iter().last().map(|(n, f)| (n, f.clone())).unwrap();
    let mut terms = f.terms().to_vec();
    terms[0].coeff += Complex64::new(1e-3, 0.0);
    x.set(n, FlatFn::from_terms(terms));
    let report = verify_construction(&bad, &opts).unwrap();
    assert_eq!(report.first_failure().unwrap().name, "residual exactness, stage 2");
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    assert!(failed.contains(&"increment chaining, stage 1"), "{failed:?}");
    let empty = ConstructionState::empty(state.config.clone());
    assert!(verify_construction(&empty, &opts).unwrap().passed());
    assert!(residual(&seed_x1(), &state.config.spec).len() == 1);
}
