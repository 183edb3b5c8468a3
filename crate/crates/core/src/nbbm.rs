//! Event-driven simulation of the N-BBM in jump form.
//!
//! `N` independent Brownian particles; at the jump times of a Poisson clock
//! of rate `N − 1` the leftmost particle jumps onto one of the other `N − 1`
//! particles, chosen uniformly. Between events every particle receives an
//! exact Gaussian increment, so the scheme has no time-discretisation error.
//! Each event costs `O(N)` and events arrive at rate `N − 1`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measures::{Centring, EmpiricalMeasure};
use crate::rng::{derive_seed, rng_from_seed, SimRng, STREAM_DYNAMICS, STREAM_INIT};
use crate::waves::TravellingWave;

/// Initial configuration of a particle system.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// All particles at the origin.
    AllZero,
    /// iid draws from the travelling wave of the given speed.
    IidWave(f64),
    /// Positions given explicitly; their count must equal `N`.
    Explicit(Vec<f64>),
}

impl InitialCondition {
    pub fn iid_minimal() -> Self {
        InitialCondition::IidWave(crate::waves::SQRT2)
    }

    pub fn positions<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            InitialCondition::AllZero => Ok(vec![0.0; n]),
            InitialCondition::IidWave(c) => {
                let w = TravellingWave::new(*c)?;
                Ok((0..n).map(|_| w.draw(rng)).collect())
            }
            InitialCondition::Explicit(p) => {
                if p.len() != n {
                    return Err(Error::LengthMismatch(n, p.len()));
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinitePosition);
                }
                Ok(p.clone())
            }
        }
    }
}

impl std::str::FromStr for InitialCondition {
    type Err = Error;

    /// `zero`, `pimin`, `pic:<speed>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "delta" => Ok(InitialCondition::AllZero),
            "pimin" => Ok(InitialCondition::iid_minimal()),
            _ => match s.strip_prefix("pic:").map(str::parse::<f64>) {
                Some(Ok(c)) => Ok(InitialCondition::IidWave(c)),
                _ => Err(Error::InvalidArgument(format!("unknown initial condition {s:?}"))),
            },
        }
    }
}

/// One selection event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub victim_index: usize,
    pub target_index: usize,
    /// Post-jump minus pre-jump position of the victim; never negative.
    pub displacement: f64,
}

#[derive(Debug, Clone)]
pub struct ParticleSystem {
    positions: Vec<f64>,
    time: f64,
    n_events: u64,
    next_event: Option<f64>,
    seed: u64,
    rng: SimRng,
}

/// Full resumable state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub time: f64,
    pub n_events: u64,
    pub positions: Vec<f64>,
    pub next_event_time: Option<f64>,
    pub rng_stream: u64,
    /// ChaCha word position, as a decimal string (it is a `u128`).
    pub rng_word_pos: String,
}

impl ParticleSystem {
    /// Initial positions come from stream [`STREAM_INIT`] of `seed`, the
    /// dynamics from stream [`STREAM_DYNAMICS`].
    pub fn new(n: usize, init: &InitialCondition, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        let mut init_rng = rng_from_seed(derive_seed(seed, 0, STREAM_INIT));
        let positions = init.positions(n, &mut init_rng)?;
        Ok(Self {
            positions,
            time: 0.0,
            n_events: 0,
            next_event: None,
            seed,
            rng: rng_from_seed(derive_seed(seed, 0, STREAM_DYNAMICS)),
        })
    }

    pub fn from_positions(positions: Vec<f64>, seed: u64) -> Result<Self> {
        let n = positions.len();
        Self::new(n, &InitialCondition::Explicit(positions), seed)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn n_events(&self) -> u64 {
        self.n_events
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Index of the leftmost particle, lowest index on ties.
    pub fn leftmost_index(&self) -> usize {
        argmin(&self.positions)
    }

    /// `L_t`.
    pub fn leftmost(&self) -> f64 {
        self.positions[self.leftmost_index()]
    }

    /// `M_t`, the barycentre.
    pub fn barycentre(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.n() as f64
    }

    /// `b(Y_t)`, mean distance to the leftmost particle.
    pub fn gap_mean(&self) -> f64 {
        let l = self.leftmost();
        self.positions.iter().map(|x| x - l).sum::<f64>() / self.n() as f64
    }

    /// `max_i Y^i_t`.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .positions
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        hi - lo
    }

    fn pending_event(&mut self) -> f64 {
        match self.next_event {
            Some(t) => t,
            None => {
                let rate = (self.n() - 1) as f64;
                let dt: f64 = Exp1.sample(&mut self.rng);
                let t = self.time + dt / rate;
                self.next_event = Some(t);
                t
            }
        }
    }

    /// Add independent `N(0, dt)` increments; returns the new argmin.
    fn diffuse(&mut self, dt: f64) -> usize {
        let sd = dt.sqrt();
        let mut best = 0;
        let mut best_x = f64::INFINITY;
        for (i, x) in self.positions.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *x += sd * z;
            if *x < best_x {
                best_x = *x;
                best = i;
            }
        }
        best
    }

    pub(crate) fn jump_leftmost_to(&mut self, victim: usize, target: usize) -> Event {
        let before = self.positions[victim];
        self.positions[victim] = self.positions[target];
        self.n_events += 1;
        Event {
            time: self.time,
            victim_index: victim,
            target_index: target,
            displacement: self.positions[victim] - before,
        }
    }

    /// Run to the next selection event and perform it.
    pub fn step_event(&mut self) -> Result<Event> {
        let n = self.n();
        if n < 2 {
            return Err(Error::NoSelectionEvents);
        }
        let t = self.pending_event();
        let victim = self.diffuse(t - self.time);
        self.time = t;
        self.next_event = None;
        let mut target = self.rng.random_range(0..n - 1);
        if target >= victim {
            target += 1;
        }
        Ok(self.jump_leftmost_to(victim, target))
    }

    /// Advance to exactly `t_end`, performing every event on the way.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        self.advance_with(t_end, |_, _| {})
    }

    /// As [`advance_to`](Self::advance_to), calling `on_event` after every event.
    pub fn advance_with(&mut self, t_end: f64, mut on_event: impl FnMut(&Self, &Event)) -> Result<()> {
        if !(t_end >= self.time) {
            return Err(Error::TimeReversal {
                from: self.time,
                to: t_end,
            });
        }
        if self.n() >= 2 {
            while self.pending_event() <= t_end {
                let ev = self.step_event()?;
                on_event(self, &ev);
            }
        }
        if t_end > self.time {
            self.diffuse(t_end - self.time);
            self.time = t_end;
        }
        Ok(())
    }

    /// `Θ^N` of the current positions, optionally recentred.
    pub fn snapshot(&self, centring: Centring) -> EmpiricalMeasure {
        EmpiricalMeasure::from_positions(&self.positions)
            .expect("positions are finite and non-empty")
            .recentre(centring)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.seed,
            time: self.time,
            n_events: self.n_events,
            positions: self.positions.clone(),
            next_event_time: self.next_event,
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos().to_string(),
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.positions.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let word_pos: u128 = c
            .rng_word_pos
            .parse()
            .map_err(|_| Error::InvalidArgument("bad rng_word_pos".into()))?;
        let mut rng = rng_from_seed(derive_seed(c.seed, 0, STREAM_DYNAMICS));
        rng.set_stream(c.rng_stream);
        rng.set_word_pos(word_pos);
        Ok(Self {
            positions: c.positions.clone(),
            time: c.time,
            n_events: c.n_events,
            next_event: c.next_event_time,
            seed: c.seed,
            rng,
        })
    }
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

/// One row of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub leftmost: f64,
    pub median: f64,
    pub mean: f64,
    pub n_events: u64,
}

/// Sample `(t, L, A, M, n_events)` every `interval` up to `t_end`.
pub fn record_trajectory(ps: &mut ParticleSystem, t_end: f64, interval: f64) -> Result<Vec<TrajectoryRow>> {
    if !(interval > 0.0) {
        return Err(Error::InvalidArgument("sample interval must be positive".into()));
    }
    let mut rows = Vec::new();
    let start = ps.time();
    let mut k = 0u64;
    loop {
        let t = (start + k as f64 * interval).min(t_end);
        ps.advance_to(t)?;
        let s = ps.snapshot(Centring::None).centring_stats();
        rows.push(TrajectoryRow {
            time: t,
            leftmost: s.leftmost,
            median: s.median,
            mean: s.mean,
            n_events: ps.n_events(),
        });
        if t >= t_end {
            break;
        }
        k += 1;
    }
    Ok(rows)
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = String::from("time,L,A,M,n_events\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.time, r.leftmost, r.median, r.mean, r.n_events);
    }
    s
}
