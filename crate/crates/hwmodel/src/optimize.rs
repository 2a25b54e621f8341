//! Design-space search over `(p, d)`.

use std::cmp::Ordering;
use std::io::Write;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::model::{estimate, estimate_perf, CostParams, CostReport, HwConfig, MAX_DEPTH};
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricMode {
    /// GOPS/W.
    Efficiency,
    /// GOPS, for designs drawing at most `budget_w`.
    PerfCapped { budget_w: f64 },
    /// `perf^alpha / power^beta`.
    Weighted { alpha: f64, beta: f64 },
}

impl Default for MetricMode {
    fn default() -> Self {
        MetricMode::Efficiency
    }
}

/// Score of a design, or `None` when the mode rules it out.
pub fn metric(perf_gops: f64, power_w: f64, mode: MetricMode) -> Result<Option<f64>> {
    if !(power_w > 0.0) {
        return Err(Error::InvalidValue(format!("power {power_w} W")));
    }
    Ok(match mode {
        MetricMode::Efficiency => Some(perf_gops / power_w),
        MetricMode::PerfCapped { budget_w } => (power_w <= budget_w).then_some(perf_gops),
        MetricMode::Weighted { alpha, beta } => Some(perf_gops.powf(alpha) / power_w.powf(beta)),
    })
}

/// Index in `lo..=hi` maximizing `f`, assuming `f` is unimodal there.
/// Plateaus resolve toward the smaller index; NaN counts as `-inf`.
pub fn ternary_search_max(lo: usize, hi: usize, mut f: impl FnMut(usize) -> f64) -> usize {
    assert!(lo <= hi, "empty range {lo}..={hi}");
    let mut g = |x: usize| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if g(m1) < g(m2) {
            lo = m1 + 1;
        } else {
            hi = m2;
        }
    }
    let mut best = lo;
    let mut best_v = g(lo);
    for x in lo + 1..=hi {
        let v = g(x);
        if v > best_v {
            best = x;
            best_v = v;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub p: usize,
    pub d: usize,
    /// `None` when `(p, d)` exceeds the resource limit.
    pub report: Option<CostReport>,
    /// `None` when infeasible.
    pub metric: Option<f64>,
}

impl GridPoint {
    pub fn feasible(&self) -> bool {
        self.metric.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Design {
    pub config: HwConfig,
    pub report: CostReport,
    pub metric: f64,
    /// Upper end of the `p` range searched, after bandwidth and resource limits.
    pub p_bound: usize,
    /// The ternary search disagreed with the exhaustive scan, whose answer was returned.
    pub fallback_used: bool,
}

/// Scores `(p, d)` under `base`'s clock and pipelining.
pub fn evaluate_point(base: &HwConfig, params: &CostParams, wl: &Workload, p: usize, d: usize, mode: MetricMode) -> Result<GridPoint> {
    let cfg = base.with_pd(p, d);
    match estimate(&cfg, params, wl) {
        Ok(report) => {
            let metric = metric(report.throughput_gops, report.power_w, mode)?;
            Ok(GridPoint { p, d, report: Some(report), metric })
        }
        Err(Error::InfeasibleConfig(_)) => Ok(GridPoint { p, d, report: None, metric: None }),
        Err(e) => Err(e),
    }
}

/// Higher metric first, then fewer units, then smaller `p`, then smaller `d`.
pub fn compare_points(a: &GridPoint, b: &GridPoint) -> Ordering {
    let (ma, mb) = (a.metric.unwrap_or(f64::NEG_INFINITY), b.metric.unwrap_or(f64::NEG_INFINITY));
    mb.total_cmp(&ma).then((a.p * a.d).cmp(&(b.p * b.d))).then(a.p.cmp(&b.p)).then(a.d.cmp(&b.d))
}

fn check_ranges(p_range: &RangeInclusive<usize>, d_range: &RangeInclusive<usize>) -> Result<()> {
    if p_range.is_empty() || d_range.is_empty() || *p_range.start() == 0 || *d_range.start() == 0 || *d_range.end() > MAX_DEPTH {
        return Err(Error::InvalidValue(format!("ranges p {p_range:?}, d {d_range:?}")));
    }
    Ok(())
}

/// Every `(p, d)` in the ranges, `p` major.
pub fn explore_grid(
    base: &HwConfig,
    params: &CostParams,
    wl: &Workload,
    p_range: RangeInclusive<usize>,
    d_range: RangeInclusive<usize>,
    mode: MetricMode,
) -> Result<Vec<GridPoint>> {
    check_ranges(&p_range, &d_range)?;
    params.validate()?;
    let mut points = Vec::new();
    for p in p_range {
        for d in d_range.clone() {
            points.push(evaluate_point(base, params, wl, p, d, mode)?);
        }
    }
    Ok(points)
}

/// Best point of a grid under [`compare_points`].
pub fn grid_argmax(points: &[GridPoint]) -> Result<GridPoint> {
    points
        .iter()
        .filter(|g| g.feasible())
        .min_by(|a, b| compare_points(a, b))
        .copied()
        .ok_or_else(|| Error::InfeasibleConfig("no feasible design in range".into()))
}

/// Largest useful `p` at the smallest depth: capped by the resource limit,
/// then lowered to where the memory port saturates and more units stop
/// shortening the schedule.
pub fn p_upper_bound(base: &HwConfig, params: &CostParams, wl: &Workload, p_range: &RangeInclusive<usize>, d: usize) -> Result<usize> {
    let lo = *p_range.start();
    let hi = (*p_range.end()).min(params.resource_limit / d);
    if hi < lo {
        return Ok(lo);
    }
    let cycles = |p: usize| estimate_perf(&base.with_pd(p, d), params, wl).map(|r| r.cycles);
    let floor = cycles(hi)?;
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = a + (b - a) / 2;
        if cycles(mid)? <= floor {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    Ok(a)
}

/// Ternary search over `p` at the smallest depth, then over `d` at that `p`,
/// audited against the exhaustive grid.
pub fn optimize_design(
    base: &HwConfig,
    params: &CostParams,
    wl: &Workload,
    p_range: RangeInclusive<usize>,
    d_range: RangeInclusive<usize>,
    mode: MetricMode,
) -> Result<Design> {
    check_ranges(&p_range, &d_range)?;
    params.validate()?;
    let score = |p: usize, d: usize| -> Result<GridPoint> { evaluate_point(base, params, wl, p, d, mode) };
    let value = |g: &GridPoint| g.metric.unwrap_or(f64::NEG_INFINITY);

    let d0 = *d_range.start();
    let p_lo = *p_range.start();
    let p_bound = p_upper_bound(base, params, wl, &p_range, d0)?;
    let mut err = None;
    let mut probe = |p: usize, d: usize| match score(p, d) {
        Ok(g) => value(&g),
        Err(e) => {
            err.get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    let p_star = ternary_search_max(p_lo, p_bound, |p| probe(p, d0));
    let d_star = ternary_search_max(d0, *d_range.end(), |d| probe(p_star, d));
    if let Some(e) = err {
        return Err(e);
    }
    let candidate = score(p_star, d_star)?;

    let grid = explore_grid(base, params, wl, p_range, d_range, mode)?;
    let best = grid_argmax(&grid)?;
    let fallback_used = compare_points(&candidate, &best) != Ordering::Equal;
    let chosen = if fallback_used { best } else { candidate };
    Ok(Design {
        config: base.with_pd(chosen.p, chosen.d),
        report: chosen.report.expect("feasible points carry a report"),
        metric: chosen.metric.expect("feasible points carry a metric"),
        p_bound,
        fallback_used,
    })
}

/// Columns `p,d,cycles,gops,power_w,gops_per_w,feasible,fallback_used`;
/// cost cells are empty where the resource limit rules a point out.
pub fn write_grid_csv<W: Write>(out: W, points: &[GridPoint], fallback_used: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "d", "cycles", "gops", "power_w", "gops_per_w", "feasible", "fallback_used"])?;
    for g in points {
        let cost = match &g.report {
            Some(r) => [
                r.cycles.to_string(),
                r.throughput_gops.to_string(),
                r.power_w.to_string(),
                r.efficiency_gops_per_w.to_string(),
            ],
            None => Default::default(),
        };
        let mut row = vec![g.p.to_string(), g.d.to_string()];
        row.extend(cost);
        row.push(g.feasible().to_string());
        row.push(fallback_used.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
