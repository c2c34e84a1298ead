//! Schmidt-gap sweeps and finite-size-scaling collapse.
//!
//! Near the critical field the half-chain Schmidt gap is expected to obey
//! `Δ_S N^{μ₁} = F((λ − λ_c) N^{μ₂})`, with `μ₂ = 1/ν` and `μ₁ = β/ν`.
//!
//! The collapse cost is a leave-one-size-out measure: for every size the
//! other sizes' rescaled points are pooled into a monotone cubic (PCHIP)
//! master curve, and the size's own points inside the pooled range are
//! scored by their squared vertical distance to it. The sum is divided by
//! the point count and by the variance of all rescaled ordinates, so a
//! plain rescaling of the ordinate cannot lower it. The abscissa keeps the
//! sign of `λ − λ_c`: the gap is not symmetric about the critical point.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain_model::{ChainSpec, Parity};
use crate::free_fermion::physical_ground_state;
use crate::optimize::NelderMead;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "N,lambda,schmidt_gap,entropy,ground_energy";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    pub schmidt_gap: f64,
    pub entropy: f64,
    pub ground_energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFailure {
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
    pub metadata: Vec<(String, String)>,
}

fn half_chain_row(template: &ChainSpec, n: usize, lambda: f64) -> Result<SweepRow> {
    let mut spec = *template;
    spec.n_sites = n;
    spec.lambda = lambda;
    let state = physical_ground_state(&spec)?;
    let block = crate::entanglement::restrict(&state.correlations(), n / 2)?;
    let report = crate::entanglement::entanglement_spectrum(&block)?;
    Ok(SweepRow {
        n,
        lambda,
        schmidt_gap: report.schmidt_gap,
        entropy: report.entropy,
        ground_energy: state.energy,
    })
}

/// Half-chain gap, entropy and energy on the grid `ns × lambdas`.
///
/// Rows are ordered by `N`, then by `λ` as given. A failing point is moved to
/// `failures` and the sweep continues.
pub fn sweep(ns: &[usize], lambdas: &[f64], template: &ChainSpec) -> Result<SweepResult> {
    if let Some(n) = ns.iter().find(|&&n| n % 2 != 0 || n < 2) {
        return Err(Error::InvalidInput(format!(
            "sweep sizes must be even and at least 2, got {n}"
        )));
    }
    let unique_n: BTreeSet<usize> = ns.iter().copied().collect();
    let unique_l: BTreeSet<u64> = lambdas.iter().map(|l| l.to_bits()).collect();
    if unique_n.len() != ns.len() || unique_l.len() != lambdas.len() {
        return Err(Error::InvalidInput("duplicate N or λ in sweep grid".into()));
    }
    let tasks: Vec<(usize, f64)> = ns
        .iter()
        .flat_map(|&n| lambdas.iter().map(move |&l| (n, l)))
        .collect();
    let outcomes: Vec<_> = tasks
        .par_iter()
        .map(|&(n, l)| (n, l, half_chain_row(template, n, l)))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (n, lambda, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(SweepFailure {
                n,
                lambda,
                error: e.to_string(),
            }),
        }
    }
    let metadata = vec![
        ("freechain_version".into(), env!("CARGO_PKG_VERSION").into()),
        ("model".into(), format!("{:?}", template.model).to_lowercase()),
        ("gamma".into(), fmt_real(template.gamma)),
        ("boundary".into(), format!("{:?}", template.boundary).to_lowercase()),
        (
            "parity".into(),
            template
                .sector()
                .map_or("none".into(), |p: Parity| format!("{p:?}").to_lowercase()),
        ),
        ("block".into(), "N/2".into()),
        (
            "zero_mode_rel".into(),
            fmt_real(crate::free_fermion::ZERO_MODE_REL),
        ),
    ];
    Ok(SweepResult {
        rows,
        failures,
        metadata,
    })
}

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepResult {
    /// `#`-prefixed metadata lines, the header, then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        for f in &self.failures {
            let _ = writeln!(
                out,
                "# failed N={} lambda={}: {}",
                f.n,
                fmt_real(f.lambda),
                f.error
            );
        }
        let _ = writeln!(out, "{CSV_HEADER}");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.n,
                fmt_real(r.lambda),
                fmt_real(r.schmidt_gap),
                fmt_real(r.entropy),
                fmt_real(r.ground_energy)
            );
        }
        out
    }

    /// Reads what [`SweepResult::to_csv`] writes. Comment lines of the form
    /// `# key=value` become metadata.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (no, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.trim().split_once('=') {
                    metadata.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !header_seen {
                if line.trim() != CSV_HEADER {
                    return Err(Error::InvalidInput(format!(
                        "expected header `{CSV_HEADER}`, found `{line}`"
                    )));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::InvalidInput(format!("malformed sweep row on line {}", no + 1));
            if fields.len() != 5 {
                return Err(bad());
            }
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
            rows.push(SweepRow {
                n: fields[0].parse().map_err(|_| bad())?,
                lambda: real(fields[1])?,
                schmidt_gap: real(fields[2])?,
                entropy: real(fields[3])?,
                ground_energy: real(fields[4])?,
            });
        }
        if !header_seen {
            return Err(Error::InvalidInput("sweep CSV has no header".into()));
        }
        Ok(Self {
            rows,
            failures: Vec::new(),
            metadata,
        })
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing, at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "spline needs ≥ 2 strictly increasing abscissae".into(),
            ));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Value at `t`, clamped to the end values outside the range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseFit {
    pub mu1: f64,
    pub mu2: f64,
    pub cost: f64,
    pub nu_est: f64,
    pub beta_est: f64,
}

/// Search region and data window for [`collapse`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchBox {
    pub mu1: (f64, f64),
    pub mu2: (f64, f64),
    pub grid: usize,
    /// Only rows with `|λ − λ_c| ≤ window` enter the fit.
    pub window: f64,
}

impl Default for SearchBox {
    fn default() -> Self {
        Self {
            mu1: (0.0, 0.5),
            mu2: (0.5, 1.5),
            grid: 21,
            window: 0.1,
        }
    }
}

/// Each size must keep this fraction of its points inside the range of the
/// other sizes, otherwise the cost is [`NO_OVERLAP_COST`].
const MIN_OVERLAP: f64 = 0.25;
const NO_OVERLAP_COST: f64 = 1e3;

struct Series {
    n: f64,
    dx: Vec<f64>,
    gap: Vec<f64>,
}

fn group(rows: &[SweepRow], lambda_c: f64, window: f64) -> Vec<Series> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let mut pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.n == n && (r.lambda - lambda_c).abs() <= window + 1e-12)
                .map(|r| (r.lambda - lambda_c, r.schmidt_gap))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                n: n as f64,
                dx: pts.iter().map(|p| p.0).collect(),
                gap: pts.iter().map(|p| p.1).collect(),
            }
        })
        .collect()
}

fn collapse_cost(series: &[Series], mu1: f64, mu2: f64) -> f64 {
    let scaled: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let sy = s.n.powf(mu1);
            let sx = s.n.powf(mu2);
            s.dx.iter()
                .zip(&s.gap)
                .map(|(&x, &y)| (x * sx, y * sy))
                .collect()
        })
        .collect();
    let all_y: Vec<f64> = scaled.iter().flatten().map(|p| p.1).collect();
    let mean = all_y.iter().sum::<f64>() / all_y.len() as f64;
    let var = all_y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / all_y.len() as f64;
    if !(var > 0.0) {
        return NO_OVERLAP_COST;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, own) in scaled.iter().enumerate() {
        let mut pooled: Vec<(f64, f64)> = scaled
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, s)| s.iter().copied())
            .collect();
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        // merge coincident abscissae
        let mut xs: Vec<f64> = Vec::with_capacity(pooled.len());
        let mut ys: Vec<f64> = Vec::with_capacity(pooled.len());
        let mut k = 0;
        while k < pooled.len() {
            let mut j = k;
            let mut acc = 0.0;
            while j < pooled.len() && pooled[j].0 - pooled[k].0 <= 1e-12 * (1.0 + pooled[k].0.abs()) {
                acc += pooled[j].1;
                j += 1;
            }
            xs.push(pooled[k].0);
            ys.push(acc / (j - k) as f64);
            k = j;
        }
        let Ok(master) = Pchip::new(xs, ys) else {
            return NO_OVERLAP_COST;
        };
        let (lo, hi) = master.range();
        let inside: Vec<&(f64, f64)> = own.iter().filter(|p| p.0 >= lo && p.0 <= hi).collect();
        if (inside.len() as f64) < MIN_OVERLAP * own.len() as f64 || inside.is_empty() {
            return NO_OVERLAP_COST;
        }
        for p in inside {
            total += (p.1 - master.eval(p.0)).powi(2);
            count += 1;
        }
    }
    total / count as f64 / var
}

/// Collapse exponents minimising the cost over `search`: coarse grid, then
/// a simplex refinement from the best grid point (kept inside the box).
pub fn collapse(sweep: &SweepResult, lambda_c: f64, search: &SearchBox) -> Result<CollapseFit> {
    let series = group(&sweep.rows, lambda_c, search.window);
    if series.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "collapse needs at least 3 distinct sizes, got {}",
            series.len()
        )));
    }
    if series.iter().any(|s| s.dx.len() < 3) {
        return Err(Error::InvalidInput(
            "every size needs at least 3 points inside the window".into(),
        ));
    }
    if search.grid < 2 || !(search.mu1.0 < search.mu1.1) || !(search.mu2.0 < search.mu2.1) {
        return Err(Error::InvalidInput("degenerate search box".into()));
    }
    let at = |range: (f64, f64), k: usize| {
        range.0 + (range.1 - range.0) * k as f64 / (search.grid - 1) as f64
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..search.grid {
        for j in 0..search.grid {
            let (m1, m2) = (at(search.mu1, i), at(search.mu2, j));
            let c = collapse_cost(&series, m1, m2);
            if c < best.0 {
                best = (c, m1, m2);
            }
        }
    }
    let inside = |x: &[f64]| {
        x[0] >= search.mu1.0 && x[0] <= search.mu1.1 && x[1] >= search.mu2.0 && x[1] <= search.mu2.1
    };
    let step = ((search.mu1.1 - search.mu1.0).min(search.mu2.1 - search.mu2.0)) / (search.grid - 1) as f64;
    let nm = NelderMead {
        step,
        f_tol: 1e-14,
        x_tol: 1e-7,
        max_iter: 2000,
    };
    let refined = nm.minimize(
        |x| {
            if inside(x) {
                collapse_cost(&series, x[0], x[1])
            } else {
                f64::INFINITY
            }
        },
        &[best.1, best.2],
    );
    let (mu1, mu2, cost) = if refined.value <= best.0 {
        (refined.x[0], refined.x[1], refined.value)
    } else {
        (best.1, best.2, best.0)
    };
    Ok(CollapseFit {
        mu1,
        mu2,
        cost,
        nu_est: 1.0 / mu2,
        beta_est: mu1 / mu2,
    })
}

/// Collapse cost at given exponents, for diagnostics and tests.
pub fn collapse_cost_at(sweep: &SweepResult, lambda_c: f64, window: f64, mu1: f64, mu2: f64) -> Result<f64> {
    let series = group(&sweep.rows, lambda_c, window);
    if series.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 sizes".into()));
    }
    Ok(collapse_cost(&series, mu1, mu2))
}

/// Inclusive grid `start, start+step, …` up to `stop` (with a small slack).
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::InvalidInput(format!(
            "bad grid {start}:{stop}:{step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(Error::ResourceGuard("grid has more than 10^6 points".into()));
    }
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}
