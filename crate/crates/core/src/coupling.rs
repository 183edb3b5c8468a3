//! Two N-BBMs driven through a Monge-optimal matching.
//!
//! The pair runs in branch form on a shared clock of rate `N`. At each tick a
//! particle `i` of the first system is chosen uniformly; if it is the leftmost
//! nothing happens (probability `1/N`). Otherwise the leftmost particle of the
//! first system jumps onto `i` and the leftmost particle of the second system
//! jumps onto the partner of `i` under a matching `ι′` of the two systems with
//! their leftmost particles removed. Each marginal is therefore an exact
//! N-BBM. Between ticks, matched particles share their Brownian increments.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{capped_matching, capped_matching_cost};
use crate::nbbm::InitialCondition;
use crate::replicas::run_replicas;
use crate::rng::{derive_seed, rng_from_seed, SimRng, STREAM_DYNAMICS, STREAM_INIT, STREAM_INIT_B};
use crate::stats::mean_se;

/// Permutation `ι` minimising `(1/N) Σ |x_i − y_ι(i)| ∧ 1`; ties go to
/// rank-order pairing.
pub fn monge_match(x: &[f64], y: &[f64]) -> Result<Vec<usize>> {
    Ok(capped_matching(x, y)?.0)
}

/// Capped distance between the empirical measures of two configurations.
pub fn config_distance(x: &[f64], y: &[f64]) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    capped_matching_cost(&xs, &ys).expect("equal lengths")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// `ι′` is the Monge-optimal matching of the reduced configurations.
    Full,
    /// `ι′` is obtained from `ι` by the single swap that pairs the two
    /// leftmost particles with each other's partners.
    Literal,
}

impl std::str::FromStr for CouplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CouplingMode::Full),
            "literal" => Ok(CouplingMode::Literal),
            _ => Err(Error::InvalidArgument(format!("unknown coupling mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledEvent {
    pub time: f64,
    /// Distance just before the tick, after the shared diffusion; only
    /// computed when tracking is on.
    pub w_before: Option<f64>,
    pub w_after: f64,
    /// The leftmost particle was selected: no jump in either system.
    pub idle: bool,
}

#[derive(Debug, Clone)]
pub struct CoupledPair {
    a: Vec<f64>,
    b: Vec<f64>,
    /// `a[i]` is matched with `b[iota[i]]`.
    iota: Vec<usize>,
    time: f64,
    n_events: u64,
    mode: CouplingMode,
    track: bool,
    rng: SimRng,
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

impl CoupledPair {
    pub fn new(a: Vec<f64>, b: Vec<f64>, seed: u64, mode: CouplingMode) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch(a.len(), b.len()));
        }
        if a.len() < 2 {
            return Err(Error::NoSelectionEvents);
        }
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::NonFinitePosition);
        }
        let iota = monge_match(&a, &b)?;
        Ok(Self {
            a,
            b,
            iota,
            time: 0.0,
            n_events: 0,
            mode,
            track: false,
            rng: rng_from_seed(derive_seed(seed, 0, STREAM_DYNAMICS)),
        })
    }

    /// Independent initial draws for the two systems.
    pub fn from_initial(
        n: usize,
        init_a: &InitialCondition,
        init_b: &InitialCondition,
        seed: u64,
        mode: CouplingMode,
    ) -> Result<Self> {
        let a = init_a.positions(n, &mut rng_from_seed(derive_seed(seed, 0, STREAM_INIT)))?;
        let b = init_b.positions(n, &mut rng_from_seed(derive_seed(seed, 0, STREAM_INIT_B)))?;
        Self::new(a, b, seed, mode)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Shared by both systems.
    pub fn n_events(&self) -> u64 {
        self.n_events
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Also compute the pre-jump distance at every tick (one extra
    /// `O(N²)` matching per tick).
    pub fn track_distance(&mut self, on: bool) {
        self.track = on;
    }

    pub fn matching(&self) -> &[usize] {
        &self.iota
    }

    /// `W(m_t, m̃_t)`.
    pub fn distance(&self) -> f64 {
        config_distance(&self.a, &self.b)
    }

    /// Mean capped cost of the current matching; equals [`distance`](Self::distance)
    /// at tick times and bounds it from above in between.
    pub fn matching_cost(&self) -> f64 {
        self.iota
            .iter()
            .enumerate()
            .map(|(i, &j)| (self.a[i] - self.b[j]).abs().min(1.0))
            .sum::<f64>()
            / self.n() as f64
    }

    fn diffuse(&mut self, dt: f64) {
        let sd = dt.sqrt();
        for i in 0..self.a.len() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.a[i] += sd * z;
            self.b[self.iota[i]] += sd * z;
        }
    }

    /// Partner of `i` under `ι′`, a matching of the systems without their
    /// leftmost particles `i_star` and `j_star`.
    fn reduced_partner(&self, i: usize, i_star: usize, j_star: usize) -> usize {
        match self.mode {
            CouplingMode::Literal => {
                if self.iota[i_star] == j_star || self.iota[i] != j_star {
                    self.iota[i]
                } else {
                    // i is the partner of j*: it takes over the partner of i*
                    self.iota[i_star]
                }
            }
            CouplingMode::Full => {
                let ia: Vec<usize> = (0..self.n()).filter(|&k| k != i_star).collect();
                let jb: Vec<usize> = (0..self.n()).filter(|&k| k != j_star).collect();
                let xa: Vec<f64> = ia.iter().map(|&k| self.a[k]).collect();
                let yb: Vec<f64> = jb.iter().map(|&k| self.b[k]).collect();
                let perm = monge_match(&xa, &yb).expect("equal lengths");
                let pos = ia.iter().position(|&k| k == i).expect("i is not the leftmost");
                jb[perm[pos]]
            }
        }
    }

    pub fn step_coupled(&mut self) -> Result<CoupledEvent> {
        let n = self.n();
        let dt: f64 = Exp1.sample(&mut self.rng);
        let dt = dt / n as f64;
        self.diffuse(dt);
        self.time += dt;
        self.n_events += 1;
        let w_before = self.track.then(|| self.distance());
        let i = self.rng.random_range(0..n);
        let i_star = argmin(&self.a);
        let idle = i == i_star;
        if !idle {
            let j_star = argmin(&self.b);
            let partner = self.reduced_partner(i, i_star, j_star);
            self.a[i_star] = self.a[i];
            self.b[j_star] = self.b[partner];
        }
        // idle ticks re-match too: diffusion keeps the cost of ι but not
        // its optimality
        self.iota = monge_match(&self.a, &self.b)?;
        Ok(CoupledEvent {
            time: self.time,
            w_before,
            w_after: self.matching_cost(),
            idle,
        })
    }

    /// Run events up to time `t` and diffuse to `t` exactly.
    pub fn advance_to(&mut self, t: f64, mut on_event: impl FnMut(&CoupledEvent)) -> Result<()> {
        if t < self.time {
            return Err(Error::TimeReversal { from: self.time, to: t });
        }
        loop {
            // peek the next tick without consuming randomness out of order
            let mut probe = self.rng.clone();
            let dt: f64 = Exp1.sample(&mut probe);
            if self.time + dt / self.n() as f64 > t {
                break;
            }
            let ev = self.step_coupled()?;
            on_event(&ev);
        }
        if t > self.time {
            self.diffuse(t - self.time);
            self.time = t;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionRow {
    pub t: f64,
    /// Replica mean of `W(m_t, m̃_t)`.
    pub lhs: f64,
    /// `eᵗ` times the replica mean of `W(m_0, m̃_0)`.
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// Standard error of `lhs − rhs` across replicas.
    pub std_error: f64,
    pub holds: bool,
}

/// `E[W(m_t, m̃_t)] ≤ eᵗ E[W(m_0, m̃_0)]` at 3σ for each time in `times`
/// (which must be non-decreasing); each replica is one coupled run.
pub fn contraction_estimate(
    n: usize,
    init_a: &InitialCondition,
    init_b: &InitialCondition,
    times: &[f64],
    n_replicas: usize,
    seed: u64,
    mode: CouplingMode,
) -> Result<Vec<ContractionRow>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("times must be non-negative and sorted".into()));
    }
    let runs = run_replicas(n_replicas, seed, |_, s| -> Result<(f64, Vec<f64>)> {
        let mut pair = CoupledPair::from_initial(n, init_a, init_b, s, mode)?;
        let w0 = pair.distance();
        let mut wt = Vec::with_capacity(times.len());
        for &t in times {
            pair.advance_to(t, |_| {})?;
            wt.push(pair.distance());
        }
        Ok((w0, wt))
    });
    let runs: Vec<(f64, Vec<f64>)> = runs.into_iter().collect::<Result<_>>()?;
    let w0: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mean_w0 = w0.iter().sum::<f64>() / w0.len() as f64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let g = t.exp();
            let diff: Vec<f64> = runs.iter().map(|r| r.1[k] - g * r.0).collect();
            let (d, se) = mean_se(&diff);
            let lhs = runs.iter().map(|r| r.1[k]).sum::<f64>() / runs.len() as f64;
            let rhs = g * mean_w0;
            ContractionRow {
                t,
                lhs,
                rhs,
                margin: rhs - lhs,
                std_error: se,
                holds: d <= 3.0 * se || d <= 0.0,
            }
        })
        .collect())
}

/// Increments `W(τ_k) − W(τ_{k−1}) − W(τ_k−)/N` of the compensated distance
/// along one coupled run.
pub fn supermartingale_increments(pair: &mut CoupledPair, t_end: f64) -> Result<Vec<f64>> {
    let n = pair.n() as f64;
    let mut last = pair.distance();
    let mut out = Vec::new();
    pair.track_distance(true);
    pair.advance_to(t_end, |ev| {
        let before = ev.w_before.expect("tracking is on");
        out.push(ev.w_after - last - before / n);
        last = ev.w_after;
    })?;
    pair.track_distance(false);
    Ok(out)
}
