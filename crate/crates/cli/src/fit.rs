use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// 95% confidence interval of the slope.
    pub ci: (f64, f64),
}

pub fn loglog_fit(points: &[(f64, f64)]) -> LogLogFit {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let df = n - 2.0;
    let stderr = (sse / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).expect("at least three points").inverse_cdf(0.975);
    LogLogFit { slope, intercept, stderr, ci: (slope - t * stderr, slope + t * stderr) }
}
