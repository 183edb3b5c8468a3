//! Reduced-scale property checks of every module, run by `verify --suite quick`.

use rand::Rng;
use serde::Serialize;

use crate::coupling::{contraction_estimate, CoupledPair, CouplingMode};
use crate::fbpde::{check_stretching_preserved, Flow, FlowParams, InitialTail};
use crate::killedbm::{killing_time_test, simulate_killed, BoundaryPath, KilledParams};
use crate::measures::{wasserstein_w, wasserstein_w1, Centring, EmpiricalMeasure};
use crate::nbbm::{InitialCondition, ParticleSystem};
use crate::rng::{derive_seed, rng_from_seed, STREAM_INIT};
use crate::stationary::estimate_velocity;
use crate::waves::{TravellingWave, SQRT2};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(module: &'static str, name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            module,
            name,
            passed,
            detail,
        }
    }
}

/// Heap's algorithm; calls `f` on every permutation of `0..n`.
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Minimum over all permutations of `(1/N) Σ cost(x_i, y_σ(i))`.
pub fn brute_force_cost(x: &[f64], y: &[f64], cost: impl Fn(f64, f64) -> f64) -> f64 {
    let n = x.len();
    let mut best = f64::INFINITY;
    for_each_permutation(n, |p| {
        let c: f64 = (0..n).map(|i| cost(x[i], y[p[i]])).sum();
        best = best.min(c);
    });
    best / n as f64
}

fn measures_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(derive_seed(seed, 0, STREAM_INIT));
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (a, b) = (EmpiricalMeasure::from_vec(x.clone())?, EmpiricalMeasure::from_vec(y.clone())?);
        let w1 = brute_force_cost(&x, &y, |p, q| (p - q).abs());
        let w = brute_force_cost(&x, &y, |p, q| (p - q).abs().min(1.0));
        worst = worst
            .max((wasserstein_w1(&a, &b) - w1).abs())
            .max((wasserstein_w(&a, &b) - w).abs());
    }
    let brute = Check::new("measures", "wasserstein_vs_brute_force", worst < 1e-12, format!("max error {worst:.2e}"));

    let x: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..5.0)).collect();
    let m = EmpiricalMeasure::from_vec(x)?;
    let once = m.recentre(Centring::Median);
    let gaps = |e: &EmpiricalMeasure| e.atoms().windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let idem = once.recentre(Centring::Median) == once
        && gaps(&once).iter().zip(gaps(&m)).all(|(a, b)| (a - b).abs() < 1e-12)
        && once.median() == 0.0;
    let recentre = Check::new("measures", "recentre_idempotent", idem, String::new());
    Ok(vec![brute, recentre])
}

fn waves_checks() -> Vec<Check> {
    let w = TravellingWave::minimal();
    let mut res: f64 = 0.0;
    let mut x = 0.01;
    while x < 20.0 {
        let (p, dp, d2p) = w.density_derivatives(x);
        res = res.max((0.5 * d2p + SQRT2 * dp + p).abs());
        x += 0.01;
    }
    // midpoint rule on (0, 60)
    let h = 1e-3;
    let mass: f64 = (0..60_000).map(|k| w.density((k as f64 + 0.5) * h) * h).sum();
    vec![
        Check::new("waves", "ode_residual", res < 1e-8, format!("{res:.2e}")),
        Check::new(
            "waves",
            "unit_mass_mean_sqrt2",
            (mass - 1.0).abs() < 1e-6 && (w.mean() - SQRT2).abs() < 1e-12,
            format!("mass {mass:.9}, mean {:.12}", w.mean()),
        ),
    ]
}

fn nbbm_checks(seed: u64) -> Result<Vec<Check>> {
    let t = 20.0;
    let mut ps = ParticleSystem::new(16, &InitialCondition::iid_minimal(), seed)?;
    ps.advance_to(t)?;
    // events form a Poisson process of rate N − 1
    let mean = 15.0 * t;
    let z = (ps.n_events() as f64 - mean) / mean.sqrt();
    let finite = ps.positions().iter().all(|x| x.is_finite());
    Ok(vec![Check::new(
        "nbbm",
        "event_rate",
        finite && z.abs() < 4.0,
        format!("{} events, z = {z:.2}", ps.n_events()),
    )])
}

fn stationary_checks(seed: u64) -> Result<Vec<Check>> {
    let v = estimate_velocity(2, 5.0, 200.0, 4, seed)?;
    let z = (v.v_hat - 0.5) / v.std_error;
    Ok(vec![Check::new(
        "stationary",
        "two_particle_velocity",
        z.abs() < 4.0,
        format!("v = {:.4} ± {:.4}", v.v_hat, v.std_error),
    )])
}

fn fbpde_checks() -> Result<Vec<Check>> {
    let p = FlowParams {
        dx: 0.02,
        dt: 0.002,
        ..FlowParams::default()
    };
    let mut flow = Flow::new(&InitialTail::pi_min(), p)?;
    flow.advance_to(2.0)?;
    let speed = flow.boundary() / 2.0;
    let speed_ok = (speed / SQRT2 - 1.0).abs() < 0.02;
    let s = check_stretching_preserved(&InitialTail::pi_min(), &InitialTail::heaviside(), 1.0, p)?;
    Ok(vec![
        Check::new("fbpde", "wave_speed", speed_ok, format!("L_2/2 = {speed:.4}")),
        Check::new(
            "fbpde",
            "stretching_preserved",
            s.evolved.holds,
            format!("worst violation {:.2e}", s.evolved.worst_violation),
        ),
    ])
}

fn coupling_checks(seed: u64) -> Result<Vec<Check>> {
    let init = InitialCondition::iid_minimal();
    let mut rng = rng_from_seed(derive_seed(seed, 0, STREAM_INIT));
    let x = init.positions(16, &mut rng)?;
    let mut pair = CoupledPair::new(x.clone(), x, seed, CouplingMode::Full)?;
    pair.advance_to(2.0, |_| {})?;
    let diagonal = pair.a() == pair.b();
    let rows = contraction_estimate(16, &init, &init, &[0.5, 1.0], 16, seed, CouplingMode::Full)?;
    Ok(vec![
        Check::new("coupling", "diagonal_stays_equal", diagonal, String::new()),
        Check::new(
            "coupling",
            "contraction",
            rows.iter().all(|r| r.holds),
            rows.iter()
                .map(|r| format!("t={} lhs={:.3} rhs={:.3}", r.t, r.lhs, r.rhs))
                .collect::<Vec<_>>()
                .join("; "),
        ),
    ])
}

fn killedbm_checks(seed: u64) -> Result<Vec<Check>> {
    let t = 2.0;
    let boundary = BoundaryPath::linear(0.0, SQRT2, t)?;
    let mut kp = KilledParams::new(t, 3000, seed);
    kp.dt = 2e-3;
    let samples = simulate_killed(&TravellingWave::minimal(), &boundary, &kp)?;
    let r = killing_time_test(&samples, t)?;
    Ok(vec![Check::new(
        "killedbm",
        "wave_killing_is_exponential",
        r.p_value > 1e-3,
        format!("KS p = {:.3}", r.p_value),
    )])
}

/// Run every quick check. Errors inside a module become failed checks.
pub fn quick_suite(seed: u64) -> Vec<Check> {
    fn collect(out: &mut Vec<Check>, module: &'static str, r: Result<Vec<Check>>) {
        match r {
            Ok(c) => out.extend(c),
            Err(e) => out.push(Check::new(module, "error", false, e.to_string())),
        }
    }
    let mut out = Vec::new();
    collect(&mut out, "measures", measures_checks(seed));
    out.extend(waves_checks());
    collect(&mut out, "nbbm", nbbm_checks(seed));
    collect(&mut out, "stationary", stationary_checks(seed));
    collect(&mut out, "fbpde", fbpde_checks());
    collect(&mut out, "coupling", coupling_checks(seed));
    collect(&mut out, "killedbm", killedbm_checks(seed));
    out
}
