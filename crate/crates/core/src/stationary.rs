//! Long-run estimators: stationary ensembles, velocity, Birkhoff identities,
//! and the selection gap to the minimal travelling wave.
//!
//! All standard errors of time averages along one trajectory use batch means;
//! replica-level errors use the spread across independent replicas.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{w1_to_analytic, Centring, EmpiricalMeasure, TailCdf};
use crate::nbbm::{InitialCondition, ParticleSystem};
use crate::replicas::run_replicas;
use crate::stats::{batch_means, default_batches, mean_se};
use crate::waves::{TravellingWave, SQRT2};

/// `max(50, 10·ln²N)` time units.
pub fn default_burn_in(n: usize) -> f64 {
    let l = (n.max(1) as f64).ln();
    (10.0 * l * l).max(50.0)
}

#[derive(Debug, Clone)]
pub struct StationaryParams {
    pub n: usize,
    pub burn_in: f64,
    pub horizon: f64,
    pub sample_interval: f64,
    pub centring: Centring,
    pub init: InitialCondition,
    pub seed: u64,
    /// Grid step of the mean profile.
    pub profile_step: f64,
}

impl StationaryParams {
    /// Defaults: burn-in from [`default_burn_in`], unit sampling interval,
    /// leftmost centring, iid `π_min` start.
    pub fn new(n: usize, horizon_after_burn_in: f64, seed: u64) -> Self {
        let burn_in = default_burn_in(n);
        Self {
            n,
            burn_in,
            horizon: burn_in + horizon_after_burn_in,
            sample_interval: 1.0,
            centring: Centring::Leftmost,
            init: InitialCondition::iid_minimal(),
            seed,
            profile_step: 0.01,
        }
    }
}

/// Scalar observables at one sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub time: f64,
    pub leftmost: f64,
    pub barycentre: f64,
    /// `b(Y)`.
    pub gap_mean: f64,
    /// `max_i Y^i`.
    pub max_gap: f64,
}

#[derive(Debug, Clone)]
pub struct StationaryEnsemble {
    pub n: usize,
    pub centring: Centring,
    pub burn_in: f64,
    pub horizon: f64,
    pub sample_interval: f64,
    pub seed: u64,
    pub snapshots: Vec<EmpiricalMeasure>,
    /// Average tail of the snapshots (the mean measure).
    pub mean_profile: TailCdf,
    /// Observables at the burn-in time and at every snapshot time.
    pub trace: Vec<TraceRow>,
}

fn trace_row(ps: &ParticleSystem) -> TraceRow {
    let l = ps.leftmost();
    TraceRow {
        time: ps.time(),
        leftmost: l,
        barycentre: ps.barycentre(),
        gap_mean: ps.gap_mean(),
        max_gap: ps.spread(),
    }
}

fn mean_tail(snapshots: &[EmpiricalMeasure], step: f64) -> Result<TailCdf> {
    let lo = snapshots.iter().map(|m| m.leftmost()).fold(f64::INFINITY, f64::min);
    let hi = snapshots
        .iter()
        .map(|m| m.atoms()[m.len() - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    let step = step.max((hi - lo) / 200_000.0);
    let grid = TailCdf::uniform_grid(lo - step, hi + step, step);
    let k = snapshots.len() as f64;
    let values = grid
        .iter()
        .map(|&x| snapshots.iter().map(|m| m.tail(x)).sum::<f64>() / k)
        .collect();
    TailCdf::new(grid, values)
}

/// Run one long trajectory and collect recentred snapshots after burn-in.
pub fn estimate_stationary(p: &StationaryParams) -> Result<StationaryEnsemble> {
    if !(p.horizon > p.burn_in) || p.burn_in < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "horizon {} must exceed burn-in {}",
            p.horizon, p.burn_in
        )));
    }
    if !(p.sample_interval > 0.0) {
        return Err(Error::InvalidArgument("sample interval must be positive".into()));
    }
    let count = ((p.horizon - p.burn_in) / p.sample_interval).floor() as usize;
    if count == 0 {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let mut ps = ParticleSystem::new(p.n, &p.init, p.seed)?;
    ps.advance_to(p.burn_in)?;
    let mut trace = vec![trace_row(&ps)];
    let mut snapshots = Vec::with_capacity(count);
    for k in 1..=count {
        ps.advance_to(p.burn_in + k as f64 * p.sample_interval)?;
        trace.push(trace_row(&ps));
        snapshots.push(ps.snapshot(p.centring));
    }
    let mean_profile = mean_tail(&snapshots, p.profile_step)?;
    Ok(StationaryEnsemble {
        n: p.n,
        centring: p.centring,
        burn_in: p.burn_in,
        horizon: p.horizon,
        sample_interval: p.sample_interval,
        seed: p.seed,
        snapshots,
        mean_profile,
        trace,
    })
}

fn batched(xs: &[f64]) -> (f64, f64) {
    if xs.len() < 2 {
        return (xs.first().copied().unwrap_or(0.0), f64::INFINITY);
    }
    batch_means(xs, default_batches(xs.len())).expect("at least two samples")
}

impl StationaryEnsemble {
    /// Per-interval velocity samples `(L_{t+Δ} − L_t)/Δ`.
    pub fn leftmost_increments(&self) -> Vec<f64> {
        let dt = self.sample_interval;
        self.trace.windows(2).map(|w| (w[1].leftmost - w[0].leftmost) / dt).collect()
    }

    /// Per-interval barycentre velocity samples.
    pub fn barycentre_increments(&self) -> Vec<f64> {
        let dt = self.sample_interval;
        self.trace
            .windows(2)
            .map(|w| (w[1].barycentre - w[0].barycentre) / dt)
            .collect()
    }

    /// Displacement quotient of `L` over the sampling window, with batch SE.
    pub fn velocity(&self) -> (f64, f64) {
        batched(&self.leftmost_increments())
    }

    /// Time average of `b(Y)` at snapshot times, with batch SE.
    pub fn mean_gap(&self) -> (f64, f64) {
        let b: Vec<f64> = self.trace[1..].iter().map(|r| r.gap_mean).collect();
        batched(&b)
    }

    /// Mean of `max_i Y^i` over doubling windows ending at the horizon,
    /// most recent first: `[T/2, T]`, `[T/4, T/2]`, … (at least 8 samples each).
    pub fn max_gap_windows(&self) -> Vec<(f64, f64)> {
        let g: Vec<f64> = self.trace[1..].iter().map(|r| r.max_gap).collect();
        let mut out = Vec::new();
        let mut hi = g.len();
        while hi >= 16 {
            let lo = hi / 2;
            out.push(batched(&g[lo..hi]));
            hi = lo;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityEstimate {
    pub n: usize,
    pub v_hat: f64,
    pub std_error: f64,
    pub n_replicas: usize,
    pub burn_in: f64,
    pub horizon: f64,
}

/// `v_N` from `(L_T − L_{T₀})/(T − T₀)` averaged over replicas, `T₀` the
/// burn-in. With a single replica the SE comes from batch means.
pub fn estimate_velocity(
    n: usize,
    burn_in: f64,
    horizon: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<VelocityEstimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("velocity needs N ≥ 2".into()));
    }
    if n_replicas == 0 {
        return Err(Error::InvalidArgument("need at least one replica".into()));
    }
    if !(horizon > burn_in) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} must exceed burn-in {burn_in}"
        )));
    }
    let runs = run_replicas(n_replicas, seed, |_, s| -> Result<Vec<f64>> {
        let mut ps = ParticleSystem::new(n, &InitialCondition::iid_minimal(), s)?;
        ps.advance_to(burn_in)?;
        let span = horizon - burn_in;
        let steps = span.ceil().max(1.0) as usize;
        let mut incs = Vec::with_capacity(steps);
        let mut last = ps.leftmost();
        for k in 1..=steps {
            let t = burn_in + span * k as f64 / steps as f64;
            ps.advance_to(t)?;
            let l = ps.leftmost();
            incs.push((l - last) / (span / steps as f64));
            last = l;
        }
        Ok(incs)
    });
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let (v_hat, std_error) = if n_replicas >= 2 {
        let v: Vec<f64> = runs
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect();
        mean_se(&v)
    } else {
        batched(&runs[0])
    };
    Ok(VelocityEstimate {
        n,
        v_hat,
        std_error,
        n_replicas,
        burn_in,
        horizon,
    })
}

/// Fit `v_N ≈ √2 − a / ln²N` by weighted least squares; returns `(a, se)`.
pub fn fit_velocity_correction(estimates: &[VelocityEstimate]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64, f64)> = estimates
        .iter()
        .filter(|e| e.n >= 2)
        .map(|e| {
            let l = (e.n as f64).ln();
            (1.0 / (l * l), SQRT2 - e.v_hat, e.std_error.max(1e-12))
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let sxx: f64 = pts.iter().map(|(x, _, s)| x * x / (s * s)).sum();
    let sxy: f64 = pts.iter().map(|(x, y, s)| x * y / (s * s)).sum();
    Ok((sxy / sxx, 1.0 / sxx.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BirkhoffReport {
    pub n: usize,
    pub time_avg_b: f64,
    pub se_b: f64,
    pub v_hat: f64,
    pub se_v: f64,
    /// Barycentre velocity over the same window.
    pub v_barycentre: f64,
    pub se_barycentre: f64,
    pub discrepancy: f64,
    pub combined_se: f64,
}

impl BirkhoffReport {
    pub fn holds_at(&self, k: f64) -> bool {
        self.discrepancy <= k * self.combined_se
    }
}

/// Compare the time average of `b(Y)` with the velocity of `L` along one
/// trajectory. `N = 1` is the degenerate case `b ≡ 0`, `v ≡ 0`.
pub fn birkhoff_identity_check(n: usize, burn_in: f64, horizon: f64, seed: u64) -> Result<BirkhoffReport> {
    if n == 1 {
        return Ok(BirkhoffReport {
            n,
            time_avg_b: 0.0,
            se_b: 0.0,
            v_hat: 0.0,
            se_v: 0.0,
            v_barycentre: 0.0,
            se_barycentre: 0.0,
            discrepancy: 0.0,
            combined_se: 0.0,
        });
    }
    let mut p = StationaryParams::new(n, horizon - burn_in, seed);
    p.burn_in = burn_in;
    p.horizon = horizon;
    let ens = estimate_stationary(&p)?;
    let (b, se_b) = ens.mean_gap();
    let (v, se_v) = ens.velocity();
    let (vm, se_m) = batched(&ens.barycentre_increments());
    Ok(BirkhoffReport {
        n,
        time_avg_b: b,
        se_b,
        v_hat: v,
        se_v,
        v_barycentre: vm,
        se_barycentre: se_m,
        discrepancy: (b - v).abs(),
        combined_se: se_b.hypot(se_v),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEstimate {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    #[serde(skip)]
    pub per_snapshot: Vec<f64>,
}

/// Average `W₁` between the snapshots and `Π_min` (leftmost centring) or
/// `Π̃_min` (median centring).
pub fn selection_gap(ens: &StationaryEnsemble) -> Result<GapEstimate> {
    let wave = TravellingWave::minimal();
    let per_snapshot: Vec<f64> = match ens.centring {
        Centring::Leftmost => ens
            .snapshots
            .iter()
            .map(|m| w1_to_analytic(m, &wave))
            .collect::<Result<_>>()?,
        Centring::Median => {
            let target = wave.median_centred();
            ens.snapshots
                .iter()
                .map(|m| w1_to_analytic(m, &target))
                .collect::<Result<_>>()?
        }
        Centring::None => {
            return Err(Error::WrongCentring(
                "selection gap needs leftmost or median centring".into(),
            ))
        }
    };
    let (mean, std_error) = batched(&per_snapshot);
    Ok(GapEstimate {
        n: ens.n,
        mean,
        std_error,
        per_snapshot,
    })
}

/// Sampling-noise floor: mean `W₁` between `n` iid `π_min` draws and `Π_min`.
pub fn iid_gap_floor(n: usize, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    let wave = TravellingWave::minimal();
    let gaps = run_replicas(n_samples, seed, |_, s| -> Result<f64> {
        let mut rng = crate::rng::rng_from_seed(s);
        w1_to_analytic(&wave.sample(&mut rng, n)?, &wave)
    });
    let gaps: Vec<f64> = gaps.into_iter().collect::<Result<_>>()?;
    Ok(mean_se(&gaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::TailFunction;

    fn params(n: usize, burn: f64, horizon: f64, seed: u64) -> StationaryParams {
        let mut p = StationaryParams::new(n, 1.0, seed);
        p.burn_in = burn;
        p.horizon = horizon;
        p
    }

    #[test]
    fn burn_in_default() {
        assert_eq!(default_burn_in(2), 50.0);
        let l = 4096f64.ln();
        assert!((default_burn_in(4096) - 10.0 * l * l).abs() < 1e-9);
    }

    #[test]
    fn ensemble_shape_and_centring() {
        let ens = estimate_stationary(&params(2, 5.0, 105.5, 1)).unwrap();
        assert_eq!(ens.snapshots.len(), 100);
        assert_eq!(ens.trace.len(), 101);
        assert!(ens.snapshots.iter().all(|m| m.leftmost() == 0.0));
        let g = ens.mean_profile.grid();
        assert!(g[0] < 0.0);
        assert_eq!(ens.mean_profile.eval(g[0]), 1.0);
        assert_eq!(ens.mean_profile.eval(-0.011), 1.0);
        // mass 1 and first moment = average b
        let fm = ens.mean_profile.first_moment();
        assert!((fm - ens.mean_gap().0).abs() < 0.01, "{fm} {:?}", ens.mean_gap());

        let mut p = params(8, 5.0, 30.0, 2);
        p.centring = Centring::Median;
        let ens = estimate_stationary(&p).unwrap();
        assert!(ens.snapshots.iter().all(|m| m.median() == 0.0));
        assert!(estimate_stationary(&params(2, 5.0, 5.0, 1)).is_err());
    }

    #[test]
    fn two_seeds_and_two_starts_agree() {
        let a = estimate_stationary(&params(2, 20.0, 2020.0, 11)).unwrap();
        let b = estimate_stationary(&params(2, 20.0, 2020.0, 12)).unwrap();
        let mut pz = params(2, 20.0, 2020.0, 13);
        pz.init = InitialCondition::AllZero;
        let c = estimate_stationary(&pz).unwrap();
        for other in [&b, &c] {
            let (x, sx) = a.mean_gap();
            let (y, sy) = other.mean_gap();
            assert!((x - y).abs() < 3.0 * sx.hypot(sy), "{x} {y}");
            let ga = selection_gap(&a).unwrap();
            let gb = selection_gap(other).unwrap();
            assert!((ga.mean - gb.mean).abs() < 3.0 * ga.std_error.hypot(gb.std_error));
            // W₁ between mean profiles dominates the difference of means
            let d = a.mean_profile.l1_distance(&other.mean_profile);
            assert!(d >= (x - y).abs() - 0.02 && d < 0.1, "{d}");
        }
    }

    #[test]
    fn n2_velocity_is_one_half() {
        // for N = 2, b = gap/2 and the gap is a reflected BM with jumps to 0
        // at rate 1 and variance rate 2: E[gap] = 1, so v₂ = ½
        let v = estimate_velocity(2, 10.0, 1010.0, 4, 3).unwrap();
        assert!((v.v_hat - 0.5).abs() < 3.0 * v.std_error, "{v:?}");
        assert!(v.v_hat < SQRT2);
        assert!(estimate_velocity(1, 1.0, 2.0, 1, 1).is_err());
    }

    #[test]
    fn birkhoff_n2_and_degenerate() {
        let r = birkhoff_identity_check(2, 20.0, 2020.0, 5).unwrap();
        assert!(r.holds_at(3.0), "{r:?}");
        assert!((r.v_barycentre - r.v_hat).abs() < 3.0 * r.se_v.hypot(r.se_barycentre));
        let d = birkhoff_identity_check(1, 1.0, 2.0, 5).unwrap();
        assert_eq!((d.time_avg_b, d.v_hat, d.discrepancy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn max_gap_has_no_drift() {
        let ens = estimate_stationary(&params(16, 30.0, 1054.0, 8)).unwrap();
        let w = ens.max_gap_windows();
        assert!(w.len() >= 3);
        for pair in w.windows(2) {
            let (a, sa) = pair[0];
            let (b, sb) = pair[1];
            assert!((a - b).abs() < 4.0 * sa.hypot(sb), "{w:?}");
        }
        let (b, se) = ens.mean_gap();
        assert!(ens.mean_profile.first_moment() <= SQRT2 + 3.0 * se);
        assert!(b > 0.0);
    }

    #[test]
    fn selection_gap_requires_centring() {
        let mut p = params(4, 2.0, 10.0, 1);
        p.centring = Centring::None;
        let ens = estimate_stationary(&p).unwrap();
        assert!(matches!(selection_gap(&ens), Err(Error::WrongCentring(_))));
        p.centring = Centring::Median;
        let g = selection_gap(&estimate_stationary(&p).unwrap()).unwrap();
        assert!(g.mean > 0.0);
    }

    #[test]
    fn iid_floor_shrinks_with_n() {
        let (a, sa) = iid_gap_floor(16, 200, 1).unwrap();
        let (b, sb) = iid_gap_floor(1024, 200, 1).unwrap();
        assert!(a - b > 3.0 * sa.hypot(sb));
        // W₁ of δ₀ to Π_min is √2, an upper sanity bound for tiny samples
        assert!(a < TravellingWave::minimal().upper_integral(0.0).unwrap() + 1.0);
    }

    #[test]
    fn fit_recovers_planted_coefficient() {
        let est: Vec<VelocityEstimate> = [64usize, 256, 1024, 4096]
            .iter()
            .map(|&n| {
                let l = (n as f64).ln();
                VelocityEstimate {
                    n,
                    v_hat: SQRT2 - 3.5 / (l * l),
                    std_error: 0.01,
                    n_replicas: 1,
                    burn_in: 0.0,
                    horizon: 1.0,
                }
            })
            .collect();
        let (a, _) = fit_velocity_correction(&est).unwrap();
        assert!((a - 3.5).abs() < 1e-9);
    }
}
