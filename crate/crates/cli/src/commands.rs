use std::fs;
use std::path::Path;

use cascade_core::cascade::{iterate_with, propose, propose_lp, seed_x1};
use cascade_core::spectral::norm;
use cascade_core::verifier::verify_construction;
use cascade_core::{ConstructionState, NormSpace, Spatial, TimeMode};
use serde::Serialize;

use crate::config::{Manifest, RunConfig, SweepParameter};
use crate::failure::{Failure, EXIT_SWEEP, EXIT_VERIFY};
use crate::fit::loglog_fit;
use crate::output::{csv_bytes, num, table, write_atomic};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.txt";

fn stage_rows(state: &ConstructionState) -> Vec<Vec<String>> {
    state
        .stages
        .iter()
        .map(|st| {
            let (inc, ok, res, floor) = match &st.report {
                Some(r) => (
                    num(r.norms.increment.bound),
                    if r.norms.increment.bound <= st.delta { "yes" } else { "NO" }.to_string(),
                    num(r.norms.residual.bound),
                    r.m_floor.to_string(),
                ),
                None => ("-".into(), "-".into(), "-".into(), "-".into()),
            };
            vec![
                st.index.to_string(),
                num(st.delta),
                inc,
                ok,
                res,
                floor,
                st.x.len().to_string(),
                st.f.len().to_string(),
                st.x.max_abs_mode().to_string(),
                st.x.term_count().to_string(),
            ]
        })
        .collect()
}

pub fn summary(state: &ConstructionState) -> String {
    let space = state.config.space;
    let mut out = format!(
        "variant {:?}, omega {}, space {}, stages {}\n\n",
        state.config.spec.variant,
        state.config.spec.omega,
        space.label(),
        state.stages.len()
    );
    let inc = format!("increment {}", NormSpace::new(space, TimeMode::C0).label());
    let res = format!("residual {}", NormSpace::new(space, TimeMode::Cminus1).label());
    out += &table(
        &["stage", "delta", &inc, "<= delta", &res, "M", "|supp x|", "|supp f|", "max |n|", "terms"],
        &stage_rows(state),
    );
    out
}

pub fn construct(config: &Path, out: &Path) -> Result<(), Failure> {
    let run = RunConfig::load(config)?;
    let state = iterate_with(&run.cascade(), run.stages, |st| {
        eprintln!("stage {} done: {} modes, {} terms", st.index, st.x.len(), st.x.term_count());
    })
    .map_err(Failure::from_core)?;
    if let Err(e) = state.check_invariants() {
        return Err(Failure::new(EXIT_VERIFY, e.to_string()));
    }
    fs::create_dir_all(out).map_err(|e| Failure::io(&format!("creating {}", out.display()), e))?;
    for st in &state.stages {
        if let Some(r) = &st.report {
            let body = serde_json::to_vec_pretty(r).expect("report serializes");
            write_atomic(&out.join(format!("stage_{:03}.json", st.index)), &body)?;
        }
    }
    let text = summary(&state);
    let manifest = Manifest { run, state };
    write_atomic(&out.join(MANIFEST), &serde_json::to_vec(&manifest).expect("manifest serializes"))?;
    write_atomic(&out.join(SUMMARY), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

pub fn verify(manifest: &Path) -> Result<(), Failure> {
    let m = Manifest::load(manifest)?;
    let report = verify_construction(&m.state, &m.run.verify_options()).map_err(Failure::from_core)?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            let status = if c.skipped {
                "skip"
            } else if c.passed {
                "pass"
            } else {
                "FAIL"
            };
            vec![status.into(), c.name.clone(), num(c.value), num(c.limit), c.detail.clone()]
        })
        .collect();
    print!("{}", table(&["status", "check", "value", "limit", "detail"], &rows));
    match report.first_failure() {
        None => {
            println!("all {} checks passed", report.checks.len());
            Ok(())
        }
        Some(c) => Err(Failure::new(EXIT_VERIFY, format!("check failed: {} ({:e} > {:e})", c.name, c.value, c.limit))),
    }
}

#[derive(Serialize)]
struct SweepRow {
    parameter: &'static str,
    value: i64,
    norm: f64,
}

pub fn sweep(config: &Path, out: &Path) -> Result<(), Failure> {
    let run = RunConfig::load(config)?;
    let grid = run.sweep.clone().ok_or_else(|| Failure::invalid("config has no sweep grid"))?;
    let invalid = |m: String| Err(Failure::new(EXIT_SWEEP, m));
    let mut values = grid.values.clone();
    values.sort_unstable();
    values.dedup();
    if values.len() < 3 {
        return invalid(format!("a sweep needs at least 3 distinct points, got {}", values.len()));
    }
    if values[0] < 1 || !(grid.epsilon > 0.0) {
        return invalid("sweep values and epsilon must be positive".into());
    }
    let cfg = run.cascade().step_config(grid.epsilon, run.m_floor);
    let x = seed_x1();
    let cell = |v: i64| -> Result<f64, Failure> {
        let fail = |e: cascade_core::Error| Failure::new(EXIT_SWEEP, format!("{} = {v}: {e}", grid.parameter.label()));
        match grid.parameter {
            SweepParameter::MFloor => {
                let h = propose(&x, &cfg, v).map_err(fail)?.h;
                Ok(norm(&h, &NormSpace::new(run.space, TimeMode::C0), &run.grid).map_err(fail)?.estimate)
            }
            SweepParameter::KSplit => {
                let Spatial::Lp { p } = run.space else {
                    return Err(Failure::new(EXIT_SWEEP, "a K sweep needs an lp space".to_string()));
                };
                let k = u32::try_from(v).map_err(|_| Failure::new(EXIT_SWEEP, format!("K = {v} out of range")))?;
                propose_lp(&x, &cfg, run.m_floor, k).map_err(fail)?.non_anchor_lp(p, &run.grid).map_err(fail)
            }
        }
    };
    let norms: Vec<f64> = values.iter().map(|&v| cell(v)).collect::<Result<_, _>>()?;
    if let Some((v, _)) = values.iter().zip(&norms).find(|(_, n)| !(**n > 0.0)) {
        return invalid(format!("{} = {v}: zero norm, no log-log fit", grid.parameter.label()));
    }
    let label = grid.parameter.label();
    let rows = values.iter().zip(&norms).map(|(&value, &norm)| SweepRow { parameter: label, value, norm });
    write_atomic(out, &csv_bytes(&["parameter", "value", "norm"], rows)?)?;
    let pts: Vec<(f64, f64)> = values.iter().map(|&v| v as f64).zip(norms.iter().copied()).collect();
    let fit = loglog_fit(&pts);
    println!("{label}-sweep over {values:?}");
    println!("slope {:.4} (95% CI [{:.4}, {:.4}], stderr {:.2e})", fit.slope, fit.ci.0, fit.ci.1, fit.stderr);
    for (w, v) in norms.windows(2).zip(values.windows(2)) {
        println!("ratio {label} {} -> {}: {:.4}", v[0], v[1], w[1] / w[0]);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ExportKind {
    /// Rows (stage, mode, t, |y_n(t)|).
    CascadeCsv,
    /// Rows (stage, space, value) with the figures of the summary table.
    NormsCsv,
}

#[derive(Serialize)]
struct CascadeRow {
    stage: usize,
    mode: i64,
    t: f64,
    abs_value: f64,
}

#[derive(Serialize)]
struct NormRow {
    stage: usize,
    space: String,
    value: String,
}

pub fn export(manifest: &Path, kind: ExportKind, out: &Path) -> Result<(), Failure> {
    let m = Manifest::load(manifest)?;
    let state = &m.state;
    let bytes = match kind {
        ExportKind::CascadeCsv => {
            let k = m.run.export_samples;
            let ts: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
            let rows = state.stages.iter().flat_map(|st| {
                let ts = &ts;
                st.x.iter().flat_map(move |(n, f)| {
                    ts.iter().map(move |&t| CascadeRow { stage: st.index, mode: n, t, abs_value: f.eval(t).norm() })
                })
            });
            csv_bytes(&["stage", "mode", "t", "abs_value"], rows)?
        }
        ExportKind::NormsCsv => {
            let space = state.config.space;
            let c0 = NormSpace::new(space, TimeMode::C0).label();
            let cm1 = NormSpace::new(space, TimeMode::Cminus1).label();
            let mut rows = vec![];
            for st in &state.stages {
                rows.push(NormRow { stage: st.index, space: "delta".into(), value: num(st.delta) });
                if let Some(r) = &st.report {
                    rows.push(NormRow { stage: st.index, space: c0.clone(), value: num(r.norms.increment.bound) });
                    rows.push(NormRow { stage: st.index, space: cm1.clone(), value: num(r.norms.residual.bound) });
                }
            }
            csv_bytes(&["stage", "space", "value"], rows)?
        }
    };
    write_atomic(out, &bytes)
}
