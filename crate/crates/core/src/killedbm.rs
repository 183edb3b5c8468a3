//! Brownian motion killed at a moving boundary.
//!
//! A path starts from `u₀`, moves as a standard Brownian motion and is killed
//! the first time it is at or below `L_t`. Paths are advanced on a fixed step
//! `dt`; within a step the boundary is linear and a crossing of the Brownian
//! bridge is detected with probability `exp(−2·d₀·d₁/dt)`, where `d₀, d₁` are
//! the distances to the boundary at the two ends of the step.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbpde::{FlowTrajectory, Profile};
use crate::measures::TailFunction;
use crate::replicas::par_map;
use crate::rng::{derive_seed, rng_from_seed, STREAM_PATHS};
use crate::stats::{ks_one_sample, KsResult};

/// Minimum number of observed killing times for [`killing_time_test`].
pub const MIN_KILLED: usize = 1000;

/// Piecewise-linear boundary `t ↦ L_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl BoundaryPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch(times.len(), values.len()));
        }
        if times.is_empty() || times[0] != 0.0 {
            return Err(Error::InvalidArgument("boundary times must start at 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("boundary times must increase".into()));
        }
        if values[1..].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinitePosition);
        }
        Ok(Self { times, values })
    }

    /// `L_t = L_0 + v·t` on `[0, t_max]`.
    pub fn linear(l0: f64, speed: f64, t_max: f64) -> Result<Self> {
        Self::new(vec![0.0, t_max], vec![l0, l0 + speed * t_max])
    }

    pub fn from_trajectory(traj: &FlowTrajectory) -> Result<Self> {
        let (t, l) = traj.boundary.iter().copied().unzip();
        Self::new(t, l)
    }

    /// Reads `t,L` columns; extra columns and a header line are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let mut cols = line.split(',');
            let parsed = (
                cols.next().and_then(|c| c.trim().parse::<f64>().ok()),
                cols.next().and_then(|c| c.trim().parse::<f64>().ok()),
            );
            match parsed {
                (Some(t), Some(l)) => {
                    times.push(t);
                    values.push(l);
                }
                _ if times.is_empty() => continue,
                _ => return Err(Error::InvalidArgument(format!("bad boundary row {line:?}"))),
            }
        }
        Self::new(times, values)
    }

    pub fn t_max(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.t_max() * (1.0 + 1e-12)) {
            return Err(Error::BoundaryUndefined(t));
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k >= self.times.len() {
            return Ok(self.values[self.values.len() - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (l0, l1) = (self.values[k - 1], self.values[k]);
        Ok(l0 + (t - t0) / (t1 - t0) * (l1 - l0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KilledParams {
    pub t_query: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Killing is not checked on steps starting before this time.
    pub t_floor: f64,
}

impl KilledParams {
    pub fn new(t_query: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            t_query,
            dt: 1e-3,
            n_paths,
            seed,
            t_floor: 0.0,
        }
    }

    /// Convention for point-mass starts: skip the first step.
    pub fn for_point_mass(mut self) -> Self {
        self.t_floor = self.dt;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KilledSample {
    /// Killing time, `None` if the path survived to `t_query`.
    pub tau: Option<f64>,
    /// Position at `t_query` for survivors.
    pub position: Option<f64>,
}

/// Simulate `n_paths` killed paths started from `u₀` (drawn by inverse tail).
pub fn simulate_killed(
    u0: &(dyn TailFunction + Sync),
    boundary: &BoundaryPath,
    p: &KilledParams,
) -> Result<Vec<KilledSample>> {
    if !(p.dt > 0.0 && p.t_query > 0.0) {
        return Err(Error::InvalidArgument("dt and t_query must be positive".into()));
    }
    let steps = (p.t_query / p.dt).round().max(1.0) as usize;
    let dt = p.t_query / steps as f64;
    let ls: Vec<f64> = (0..=steps)
        .map(|k| boundary.eval(k as f64 * dt))
        .collect::<Result<_>>()?;
    let first_checked = (p.t_floor / dt - 1e-9).ceil().max(0.0) as usize;
    let sd = dt.sqrt();
    let samples = par_map((0..p.n_paths).collect(), |path| -> Result<KilledSample> {
        let mut rng = rng_from_seed(derive_seed(p.seed, path as u64, STREAM_PATHS));
        let level = 1.0 - rng.random::<f64>();
        let mut x = u0.quantile(level)?;
        for k in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            let next = x + sd * z;
            if k >= first_checked {
                let d0 = x - ls[k];
                let d1 = next - ls[k + 1];
                let t0 = k as f64 * dt;
                if d0 <= 0.0 {
                    return Ok(KilledSample {
                        tau: Some(t0),
                        position: None,
                    });
                }
                if d1 <= 0.0 {
                    return Ok(KilledSample {
                        tau: Some(t0 + dt * d0 / (d0 - d1)),
                        position: None,
                    });
                }
                let u: f64 = rng.random();
                if u < (-2.0 * d0 * d1 / dt).exp() {
                    return Ok(KilledSample {
                        tau: Some(t0 + 0.5 * dt),
                        position: None,
                    });
                }
            }
            x = next;
        }
        Ok(KilledSample {
            tau: None,
            position: Some(x),
        })
    });
    samples.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KillingReport {
    pub ks_stat: f64,
    pub p_value: f64,
    pub n_killed: usize,
    pub n_survived: usize,
    pub mean_tau: f64,
    /// Survival fraction at the horizon and its exponential prediction.
    pub survival: f64,
    pub survival_expected: f64,
    pub survival_se: f64,
}

/// KS test of the observed killing times against `Exp(1)` conditioned on
/// `τ ≤ horizon`.
pub fn killing_time_test(samples: &[KilledSample], horizon: f64) -> Result<KillingReport> {
    let taus: Vec<f64> = samples.iter().filter_map(|s| s.tau).collect();
    if taus.len() < MIN_KILLED {
        return Err(Error::TooFewSamples {
            got: taus.len(),
            need: MIN_KILLED,
        });
    }
    let norm = -(-horizon).exp_m1();
    let KsResult {
        statistic, p_value, ..
    } = ks_one_sample(&taus, |t| (-(-t.clamp(0.0, horizon)).exp_m1()) / norm);
    let n = samples.len() as f64;
    let survival = (samples.len() - taus.len()) as f64 / n;
    let expected = (-horizon).exp();
    Ok(KillingReport {
        ks_stat: statistic,
        p_value,
        n_killed: taus.len(),
        n_survived: samples.len() - taus.len(),
        mean_tau: taus.iter().sum::<f64>() / taus.len() as f64,
        survival,
        survival_expected: expected,
        survival_se: (expected * (1.0 - expected) / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramComparison {
    pub sup_distance: f64,
    /// Monte Carlo allowance: four standard errors of the worst bin.
    pub mc_tolerance: f64,
    pub n_survivors: usize,
}

/// Compare the survivor histogram (bins of width `bin`) with the density of
/// `profile` averaged over the same bins.
pub fn survivor_histogram(samples: &[KilledSample], profile: &Profile, bin: f64) -> Result<HistogramComparison> {
    let xs: Vec<f64> = samples.iter().filter_map(|s| s.position).collect();
    if xs.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let n = xs.len() as f64;
    let lo = profile.boundary.min(xs.iter().cloned().fold(f64::INFINITY, f64::min));
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nb = ((hi - lo) / bin).ceil() as usize + 1;
    let mut counts = vec![0usize; nb];
    for &x in &xs {
        counts[((x - lo) / bin).floor() as usize] += 1;
    }
    let tail = profile.tail();
    let mut sup: f64 = 0.0;
    let mut tol: f64 = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let a = lo + k as f64 * bin;
        let pde = (tail.tail(a) - tail.tail(a + bin)) / bin;
        let mc = c as f64 / (n * bin);
        sup = sup.max((mc - pde).abs());
        tol = tol.max(4.0 * (pde.max(mc) / (n * bin)).sqrt());
    }
    Ok(HistogramComparison {
        sup_distance: sup,
        mc_tolerance: tol,
        n_survivors: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::PointMass;
    use crate::stats::{ks_one_sample, normal_cdf};
    use crate::waves::{TravellingWave, SQRT2};

    #[test]
    fn boundary_path_basics() {
        let b = BoundaryPath::from_csv("t,L,L_over_t\n0,0,NaN\n1,2,2\n2,3,1.5\n").unwrap();
        assert_eq!(b.eval(0.5).unwrap(), 1.0);
        assert_eq!(b.eval(2.0).unwrap(), 3.0);
        assert!(matches!(b.eval(2.5), Err(Error::BoundaryUndefined(_))));
        assert!(BoundaryPath::new(vec![0.5, 1.0], vec![0.0, 1.0]).is_err());
        assert!(BoundaryPath::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn far_boundary_means_free_heat_flow() {
        let b = BoundaryPath::linear(-1e6, 0.0, 1.0).unwrap();
        let p = KilledParams::new(1.0, 4000, 3);
        let s = simulate_killed(&PointMass { at: 0.0 }, &b, &p).unwrap();
        assert!(s.iter().all(|k| k.tau.is_none()));
        let xs: Vec<f64> = s.iter().filter_map(|k| k.position).collect();
        assert!(ks_one_sample(&xs, normal_cdf).p_value > 1e-3);
    }

    #[test]
    fn boundary_needed_beyond_its_range() {
        let b = BoundaryPath::linear(0.0, 1.0, 0.5).unwrap();
        let p = KilledParams::new(1.0, 10, 1);
        assert!(matches!(
            simulate_killed(&PointMass { at: 1.0 }, &b, &p),
            Err(Error::BoundaryUndefined(_))
        ));
    }

    #[test]
    fn wave_start_with_wave_boundary_kills_at_rate_one() {
        let w = TravellingWave::minimal();
        let b = BoundaryPath::linear(0.0, SQRT2, 3.0).unwrap();
        let s = simulate_killed(&w, &b, &KilledParams::new(3.0, 5000, 9)).unwrap();
        let r = killing_time_test(&s, 3.0).unwrap();
        assert!(r.p_value > 1e-3, "{r:?}");
        assert!((r.survival - r.survival_expected).abs() < 4.0 * r.survival_se);
        // survivors, seen from the boundary, are again π_min
        let ys: Vec<f64> = s.iter().filter_map(|k| k.position).map(|x| x - 3.0 * SQRT2).collect();
        assert!(ks_one_sample(&ys, |y| 1.0 - w.tail(y)).p_value > 1e-3);
    }

    #[test]
    fn slow_boundary_is_detected() {
        let w = TravellingWave::minimal();
        let b = BoundaryPath::linear(0.0, 1.0, 3.0).unwrap();
        let s = simulate_killed(&w, &b, &KilledParams::new(3.0, 5000, 9)).unwrap();
        let r = killing_time_test(&s, 3.0).unwrap();
        assert!(r.p_value < 1e-3, "{r:?}");
    }

    #[test]
    fn too_few_killings_is_an_error() {
        let b = BoundaryPath::linear(-1e6, 0.0, 1.0).unwrap();
        let s = simulate_killed(&PointMass { at: 0.0 }, &b, &KilledParams::new(1.0, 50, 1)).unwrap();
        assert!(matches!(killing_time_test(&s, 1.0), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn reproducible() {
        let b = BoundaryPath::linear(-1.0, 1.0, 1.0).unwrap();
        let p = KilledParams::new(1.0, 200, 5);
        let a = simulate_killed(&PointMass { at: 0.0 }, &b, &p).unwrap();
        let c = simulate_killed(&PointMass { at: 0.0 }, &b, &p).unwrap();
        assert_eq!(a, c);
    }
}
