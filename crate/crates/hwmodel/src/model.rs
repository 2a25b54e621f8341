//! Cycle, throughput and power estimates for the butterfly array.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::{Workload, WorkloadEntry};

/// Largest depth accepted: `log2` of the largest transform size.
pub const MAX_DEPTH: usize = 20;

/// Memory accesses per butterfly per level group (two reads, two writes).
pub const ACCESSES_PER_BUTTERFLY: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipelining {
    /// Stages hold whole butterfly levels; fill costs `d` cycles.
    InterLevel,
    /// Each butterfly is further split into multiply, add and subtract stages; fill costs `3d`.
    IntraLevel,
}

impl Pipelining {
    fn fill(self, depth: usize) -> u64 {
        match self {
            Pipelining::InterLevel => depth as u64,
            Pipelining::IntraLevel => 3 * depth as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwConfig {
    /// Butterfly units per level.
    pub p: usize,
    /// Butterfly levels per pipeline pass.
    pub d: usize,
    pub clock_hz: f64,
    pub pipelining: Pipelining,
}

impl HwConfig {
    pub fn new(p: usize, d: usize, clock_hz: f64, pipelining: Pipelining) -> Self {
        Self { p, d, clock_hz, pipelining }
    }

    pub fn with_pd(&self, p: usize, d: usize) -> Self {
        Self { p, d, ..*self }
    }

    pub fn units(&self) -> usize {
        self.p * self.d
    }

    pub fn validate(&self, params: &CostParams) -> Result<()> {
        if self.p == 0 || self.d == 0 || self.d > MAX_DEPTH {
            return Err(Error::InvalidValue(format!("p={} d={} (need p ≥ 1, 1 ≤ d ≤ {MAX_DEPTH})", self.p, self.d)));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::InvalidValue(format!("clock {} Hz", self.clock_hz)));
        }
        if self.units() > params.resource_limit {
            return Err(Error::InfeasibleConfig(format!(
                "p·d = {} exceeds the resource limit {}",
                self.units(),
                params.resource_limit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub static_power_w: f64,
    pub energy_per_butterfly_j: f64,
    pub mem_access_energy_j: f64,
    /// Memory accesses served per cycle.
    pub mem_bandwidth_limit: f64,
    /// Largest `p·d` that fits.
    pub resource_limit: usize,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.static_power_w >= 0.0
            && self.static_power_w.is_finite()
            && self.energy_per_butterfly_j > 0.0
            && self.energy_per_butterfly_j.is_finite()
            && self.mem_access_energy_j >= 0.0
            && self.mem_access_energy_j.is_finite()
            && self.mem_bandwidth_limit > 0.0
            && self.resource_limit > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidValue(format!("cost parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfReport {
    pub cycles: u64,
    pub seconds: f64,
    pub throughput_gops: f64,
    /// Butterflies executed, always the workload's analytic total.
    pub butterflies: u64,
    pub mem_accesses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub cycles: u64,
    pub throughput_gops: f64,
    pub power_w: f64,
    /// `throughput_gops / power_w` (0 when both are 0).
    pub efficiency_gops_per_w: f64,
    pub butterflies: u64,
    pub mem_accesses: u64,
}

/// Cycles and memory accesses of one transform with exactly `depth` levels
/// per pass.
///
/// A transform of `L` levels takes `ceil(L/depth)` passes, each issuing
/// `ceil(b/p)` cycles for the `b` butterflies of a level. A pass that moves
/// more data than the memory port allows stalls to the memory time.
pub fn pass_cycles(entry: &WorkloadEntry, p: usize, depth: usize, pipelining: Pipelining, bandwidth: f64) -> (u64, u64) {
    let levels = entry.levels().max(1) as usize;
    let b = entry.per_level();
    let groups = levels.div_ceil(depth) as u64;
    let compute = groups * b.div_ceil(p as u64);
    let accesses = groups * ACCESSES_PER_BUTTERFLY * b;
    let memory = (accesses as f64 / bandwidth).ceil() as u64;
    (compute.max(memory) + pipelining.fill(depth), accesses)
}

/// Best of [`pass_cycles`] over depths up to `d`: unused stages are bypassed.
pub fn transform_cycles(entry: &WorkloadEntry, p: usize, d: usize, pipelining: Pipelining, bandwidth: f64) -> (u64, u64) {
    let levels = entry.levels().max(1) as usize;
    (1..=d.min(levels))
        .map(|depth| pass_cycles(entry, p, depth, pipelining, bandwidth))
        .min_by_key(|&(c, _)| c)
        .expect("depth range is nonempty")
}

pub fn estimate_perf(cfg: &HwConfig, params: &CostParams, wl: &Workload) -> Result<PerfReport> {
    params.validate()?;
    cfg.validate(params)?;
    let mut cycles = 0u64;
    let mut mem_accesses = 0u64;
    for e in &wl.entries {
        let (c, a) = transform_cycles(e, cfg.p, cfg.d, cfg.pipelining, params.mem_bandwidth_limit);
        cycles += e.count * c;
        mem_accesses += e.count * a;
    }
    let seconds = cycles as f64 / cfg.clock_hz;
    let throughput_gops = if cycles == 0 { 0.0 } else { wl.dense_ops as f64 / seconds / 1e9 };
    Ok(PerfReport { cycles, seconds, throughput_gops, butterflies: wl.total_butterflies(), mem_accesses })
}

/// `static + E_b·(butterflies/s) + E_m·(accesses/s)`.
pub fn power_of(params: &CostParams, perf: &PerfReport) -> f64 {
    if perf.seconds == 0.0 {
        return params.static_power_w;
    }
    params.static_power_w
        + params.energy_per_butterfly_j * (perf.butterflies as f64 / perf.seconds)
        + params.mem_access_energy_j * (perf.mem_accesses as f64 / perf.seconds)
}

pub fn estimate_power(cfg: &HwConfig, params: &CostParams, wl: &Workload) -> Result<f64> {
    Ok(power_of(params, &estimate_perf(cfg, params, wl)?))
}

pub fn estimate(cfg: &HwConfig, params: &CostParams, wl: &Workload) -> Result<CostReport> {
    let perf = estimate_perf(cfg, params, wl)?;
    let power_w = power_of(params, &perf);
    let efficiency_gops_per_w = if perf.throughput_gops == 0.0 { 0.0 } else { perf.throughput_gops / power_w };
    Ok(CostReport {
        cycles: perf.cycles,
        throughput_gops: perf.throughput_gops,
        power_w,
        efficiency_gops_per_w,
        butterflies: perf.butterflies,
        mem_accesses: perf.mem_accesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{uniform_workload, TransformKind};

    fn params() -> CostParams {
        CostParams {
            static_power_w: 0.35,
            energy_per_butterfly_j: 1e-11,
            mem_access_energy_j: 2e-12,
            mem_bandwidth_limit: 1e9,
            resource_limit: 1 << 20,
        }
    }

    fn complex_fft(k: usize, count: u64) -> Workload {
        let levels = k.trailing_zeros() as u64;
        let entry = WorkloadEntry { fft_size: k, kind: TransformKind::Forward, count, butterflies: (k as u64 / 2) * levels };
        Workload { entries: vec![entry], spectrum_products: 0, dense_ops: 2 * (k * k) as u64 * count }
    }

    fn cfg(p: usize, d: usize) -> HwConfig {
        HwConfig::new(p, d, 2e8, Pipelining::InterLevel)
    }

    #[test]
    fn hand_scheduled_size_8() {
        let wl = complex_fft(8, 1);
        // 3 levels of 4 butterflies on 2 units: 2 cycles each, plus 1 fill.
        assert_eq!(estimate_perf(&cfg(2, 1), &params(), &wl).unwrap().cycles, 6 + 1);
    }

    #[test]
    fn fully_parallel_limit() {
        for e in 1..=10u32 {
            let k = 1usize << e;
            let wl = complex_fft(k, 1);
            let d = e as usize;
            let (c, _) = pass_cycles(&wl.entries[0], k / 2, d, Pipelining::InterLevel, 1e9);
            assert_eq!(c, 1 + d as u64, "k={k}");
            let best = estimate_perf(&cfg(k / 2, d), &params(), &wl).unwrap().cycles;
            assert!(best <= c);
        }
    }

    #[test]
    fn doubling_p_halves_cycles() {
        let wl = complex_fft(1024, 100);
        for p in [1, 2, 4, 8, 16, 32, 64, 128] {
            let a = estimate_perf(&cfg(p, 1), &params(), &wl).unwrap().cycles as f64;
            let b = estimate_perf(&cfg(2 * p, 1), &params(), &wl).unwrap().cycles as f64;
            let fill = 100.0;
            assert!(((a - fill) / (b - fill) - 2.0).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn zero_workload_costs_static_power() {
        let r = estimate(&cfg(4, 2), &params(), &Workload::default()).unwrap();
        assert_eq!(r.power_w, 0.35);
        assert_eq!(r.cycles, 0);
        assert_eq!(r.throughput_gops, 0.0);
    }

    #[test]
    fn doubling_clock_doubles_dynamic_power() {
        let wl = uniform_workload(64, 10).unwrap();
        let slow = estimate(&cfg(8, 1), &params(), &wl).unwrap();
        let fast = estimate(&HwConfig { clock_hz: 4e8, ..cfg(8, 1) }, &params(), &wl).unwrap();
        assert_eq!(slow.cycles, fast.cycles);
        let (ds, df) = (slow.power_w - 0.35, fast.power_w - 0.35);
        assert!((df / ds - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resource_limit_is_enforced() {
        let p = CostParams { resource_limit: 16, ..params() };
        assert!(matches!(estimate(&cfg(8, 3), &p, &complex_fft(8, 1)), Err(Error::InfeasibleConfig(_))));
        assert!(estimate(&cfg(8, 2), &p, &complex_fft(8, 1)).is_ok());
        assert!(matches!(estimate(&cfg(0, 1), &p, &complex_fft(8, 1)), Err(Error::InvalidValue(_))));
    }

    #[test]
    fn bandwidth_stalls_bound_cycles() {
        let p = CostParams { mem_bandwidth_limit: 8.0, ..params() };
        // 6 levels of 32 butterflies: 768 accesses at 8 per cycle.
        let c = estimate_perf(&cfg(64, 1), &p, &complex_fft(64, 1)).unwrap().cycles;
        assert_eq!(c, 6 * 32 * 4 / 8 + 1);
    }

    #[test]
    fn intra_level_pipelining_fills_deeper() {
        let wl = complex_fft(8, 1);
        let intra = HwConfig { pipelining: Pipelining::IntraLevel, ..cfg(2, 1) };
        assert_eq!(estimate_perf(&intra, &params(), &wl).unwrap().cycles, 6 + 3);
    }
}
