//! One function per subcommand. Each resolves its config, writes its
//! outputs and returns the fields of the stdout summary.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use nbbm_core::coupling::{contraction_estimate, CouplingMode};
use nbbm_core::fbpde::{self, FlowParams, InitialTail, Scheme};
use nbbm_core::killedbm::{
    killing_time_test, simulate_killed, survivor_histogram, BoundaryPath, KilledParams, MIN_KILLED,
};
use nbbm_core::measures::{Centring, TailCdf, TailFunction};
use nbbm_core::nbbm::{record_trajectory, trajectory_csv, InitialCondition, ParticleSystem};
use nbbm_core::replicas::{par_map, replica_seed};
use nbbm_core::stationary::{
    default_burn_in, estimate_stationary, estimate_velocity, fit_velocity_correction, selection_gap,
    StationaryParams, VelocityEstimate,
};
use nbbm_core::verify::quick_suite;
use nbbm_core::waves::{TravellingWave, SQRT2};

use crate::config::{config, resolve, resolved_json};
use crate::output::{sha256_hex, OutDir};
use crate::Failure;

type Summary = Map<String, Value>;

/// Positions are echoed in the summary up to this many particles.
const ECHO_MAX: usize = 64;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse<T: FromStr<Err = nbbm_core::Error>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(Failure::from)
}

fn start(command: &str, out: &str, resolved: &impl serde::Serialize) -> Result<OutDir, Failure> {
    let mut dir = OutDir::create(PathBuf::from(out))?;
    dir.write("resolved-config.json", &resolved_json(command, resolved))?;
    Ok(dir)
}

fn summary(v: Value) -> Summary {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("summaries are objects"),
    }
}

config! {
    SimulateArgs => SimulateConfig {
        /// Number of particles.
        n: usize = 64,
        /// Final time.
        t: f64 = 10.0,
        /// Initial condition: zero, pimin or pic:<speed>.
        init: String = "pimin".into(),
        /// Spacing of the trajectory log.
        log_interval: f64 = 0.1,
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    if cfg.n == 0 || !(cfg.t >= 0.0) || !(cfg.log_interval > 0.0) {
        return Err(usage("need n ≥ 1, t ≥ 0 and log_interval > 0"));
    }
    let init: InitialCondition = parse(&cfg.init)?;
    let mut out = start("simulate", &cfg.out, &cfg)?;
    let mut ps = ParticleSystem::new(cfg.n, &init, cfg.seed)?;
    let rows = record_trajectory(&mut ps, cfg.t, cfg.log_interval)?;
    out.write("trajectory.csv", &trajectory_csv(&rows))?;
    out.write_json("final_state.json", &ps.checkpoint())?;
    out.finish("simulate")?;
    let mut s = summary(json!({
        "n": cfg.n,
        "t": ps.time(),
        "n_events": ps.n_events(),
        "leftmost": ps.leftmost(),
        "barycentre": ps.barycentre(),
    }));
    if cfg.n <= ECHO_MAX {
        s.insert("positions".into(), json!(ps.positions()));
    }
    Ok(s)
}

config! {
    StationaryArgs => StationaryConfig {
        /// Number of particles.
        n: usize = 256,
        /// Burn-in time; defaults to max(50, 10 ln²N).
        burn_in: Option<f64> = None,
        /// Length of the sampling window after burn-in.
        horizon: f64 = 200.0,
        /// Time between snapshots.
        sample_interval: f64 = 1.0,
        /// Snapshot centring: leftmost, median or none.
        centring: String = "leftmost".into(),
        /// Initial condition: zero, pimin or pic:<speed>.
        init: String = "pimin".into(),
    }
}

pub fn stationary(args: &StationaryArgs) -> Result<Summary, Failure> {
    let mut cfg = resolve(args)?;
    let burn_in = *cfg.burn_in.get_or_insert(default_burn_in(cfg.n));
    if cfg.n < 2 || burn_in < 0.0 || !(cfg.horizon >= cfg.sample_interval) || !(cfg.sample_interval > 0.0) {
        return Err(usage(
            "need n ≥ 2, burn_in ≥ 0 and horizon ≥ sample_interval > 0",
        ));
    }
    let centring: Centring = parse(&cfg.centring)?;
    let init: InitialCondition = parse(&cfg.init)?;
    let mut out = start("stationary", &cfg.out, &cfg)?;
    let ens = estimate_stationary(&StationaryParams {
        n: cfg.n,
        burn_in,
        horizon: burn_in + cfg.horizon,
        sample_interval: cfg.sample_interval,
        centring,
        init,
        seed: cfg.seed,
        profile_step: 0.01,
    })?;
    let gap = match centring {
        Centring::None => None,
        _ => Some(selection_gap(&ens)?),
    };
    let (v, v_se) = ens.velocity();
    let (b, b_se) = ens.mean_gap();
    let snapshots: Vec<Value> = ens
        .snapshots
        .iter()
        .zip(&ens.trace[1..])
        .map(|(m, row)| {
            let st = m.centring_stats();
            json!({
                "t": row.time,
                "leftmost": st.leftmost,
                "median": st.median,
                "mean": st.mean,
                "sha256": sha256_hex(m.to_csv().as_bytes()),
            })
        })
        .collect();
    out.write_json(
        "ensemble.json",
        &json!({
            "n": ens.n,
            "centring": centring.to_string(),
            "burn_in": ens.burn_in,
            "horizon": ens.horizon,
            "sample_interval": ens.sample_interval,
            "seed": ens.seed,
            "velocity": {"estimate": v, "std_error": v_se},
            "mean_gap": {"estimate": b, "std_error": b_se},
            "selection_gap": gap,
            "snapshots": snapshots,
        }),
    )?;
    out.write("mean_profile.csv", &ens.mean_profile.to_csv())?;
    let mut gaps = String::from("t,b,w1_to_wave\n");
    for (k, row) in ens.trace[1..].iter().enumerate() {
        let w = gap.as_ref().map_or(f64::NAN, |g| g.per_snapshot[k]);
        let _ = writeln!(gaps, "{},{},{}", row.time, row.gap_mean, w);
    }
    out.write("gaps.csv", &gaps)?;
    out.finish("stationary")?;
    Ok(summary(json!({
        "n": cfg.n,
        "snapshots": ens.snapshots.len(),
        "velocity": v,
        "velocity_se": v_se,
        "mean_gap": b,
        "selection_gap": gap.as_ref().map(|g| g.mean),
        "selection_gap_se": gap.as_ref().map(|g| g.std_error),
    })))
}

config! {
    VelocityArgs => VelocityConfig {
        /// Comma-separated particle numbers.
        #[arg(value_delimiter = ',')]
        n: Vec<usize> = vec![2, 64, 1024],
        /// Burn-in time; defaults to max(50, 10 ln²N) per N.
        burn_in: Option<f64> = None,
        /// Length of the measurement window after burn-in.
        horizon: f64 = 200.0,
        /// Independent replicas per N.
        replicas: usize = 8,
    }
}

pub fn velocity(args: &VelocityArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    if cfg.n.is_empty() || cfg.n.iter().any(|&n| n < 2) {
        return Err(usage("velocity needs every N ≥ 2"));
    }
    if cfg.replicas == 0 || !(cfg.horizon > 0.0) || cfg.burn_in.is_some_and(|b| b < 0.0) {
        return Err(usage("need replicas ≥ 1, horizon > 0 and burn_in ≥ 0"));
    }
    let mut out = start("velocity", &cfg.out, &cfg)?;
    let mut rows: Vec<VelocityEstimate> = Vec::new();
    for (k, &n) in cfg.n.iter().enumerate() {
        let burn = cfg.burn_in.unwrap_or_else(|| default_burn_in(n));
        rows.push(estimate_velocity(n, burn, burn + cfg.horizon, cfg.replicas, replica_seed(cfg.seed, k))?);
    }
    let mut csv = String::from("N,v_hat,std_error\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{}", r.n, r.v_hat, r.std_error);
    }
    out.write("velocity.csv", &csv)?;
    out.finish("velocity")?;
    let fit = fit_velocity_correction(&rows).ok();
    Ok(summary(json!({
        "estimates": rows,
        "correction_coefficient": fit.map(|f| f.0),
        "correction_se": fit.map(|f| f.1),
    })))
}

config! {
    SelectionArgs => SelectionConfig {
        /// Comma-separated particle numbers.
        #[arg(value_delimiter = ',')]
        n: Vec<usize> = vec![64, 256, 1024],
        /// Burn-in time; defaults to max(50, 10 ln²N) per N.
        burn_in: Option<f64> = None,
        /// Length of the sampling window after burn-in.
        horizon: f64 = 100.0,
        /// Time between snapshots.
        sample_interval: f64 = 1.0,
        /// Snapshot centring: leftmost or median.
        centring: String = "leftmost".into(),
    }
}

pub fn selection(args: &SelectionArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    if cfg.n.is_empty() || cfg.n.iter().any(|&n| n < 2) {
        return Err(usage("selection needs every N ≥ 2"));
    }
    if !(cfg.sample_interval > 0.0) || !(cfg.horizon >= cfg.sample_interval) || cfg.burn_in.is_some_and(|b| b < 0.0) {
        return Err(usage("need burn_in ≥ 0 and horizon ≥ sample_interval > 0"));
    }
    let centring: Centring = parse(&cfg.centring)?;
    if centring == Centring::None {
        return Err(usage("selection needs leftmost or median centring"));
    }
    let mut out = start("selection", &cfg.out, &cfg)?;
    let jobs: Vec<(usize, usize)> = cfg.n.iter().copied().enumerate().collect();
    let results = par_map(jobs, |(k, n)| -> nbbm_core::Result<_> {
        let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(n));
        let ens = estimate_stationary(&StationaryParams {
            n,
            burn_in,
            horizon: burn_in + cfg.horizon,
            sample_interval: cfg.sample_interval,
            centring,
            init: InitialCondition::iid_minimal(),
            seed: replica_seed(cfg.seed, k),
            profile_step: 0.01,
        })?;
        selection_gap(&ens)
    });
    let gaps = results.into_iter().collect::<nbbm_core::Result<Vec<_>>>()?;
    let mut csv = String::from("N,gap,std_error,n_snapshots\n");
    for g in &gaps {
        let _ = writeln!(csv, "{},{},{},{}", g.n, g.mean, g.std_error, g.per_snapshot.len());
    }
    out.write("gaps.csv", &csv)?;
    out.finish("selection")?;
    Ok(summary(json!({ "gaps": gaps })))
}

fn parse_scheme(s: &str) -> Result<(Scheme, u32), Failure> {
    match s.split_once(':') {
        None if s == "split" => Ok((Scheme::SplitCut, FlowParams::default().n_penalty)),
        None if s == "penalised" => Ok((Scheme::Penalised, FlowParams::default().n_penalty)),
        Some(("penalised", n)) => match n.parse::<u32>() {
            Ok(n) if n >= 2 => Ok((Scheme::Penalised, n)),
            _ => Err(usage(format!("bad penalty exponent in {s:?}"))),
        },
        _ => Err(usage(format!("unknown scheme {s:?}; use split or penalised:<n>"))),
    }
}

fn parse_tail(s: &str) -> Result<InitialTail, Failure> {
    match s.strip_prefix("file:") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
            Ok(InitialTail::Grid(TailCdf::from_csv(&text)?))
        }
        None => Ok(InitialTail::parse(s)?),
    }
}

fn flow_params(dx: f64, dt: f64, x_window: f64, scheme: &str, startup_steps: usize) -> Result<FlowParams, Failure> {
    let (scheme, n_penalty) = parse_scheme(scheme)?;
    let p = FlowParams {
        dx,
        dt,
        x_window,
        scheme,
        n_penalty,
        startup_steps,
    };
    p.validate().map_err(|e| usage(e.to_string()))?;
    Ok(p)
}

config! {
    PdeArgs => PdeConfig {
        /// Initial tail: heaviside, pimin, pic:<c>, exp:<λ> or file:<csv>.
        init: String = "heaviside".into(),
        /// Final time.
        t: f64 = 15.0,
        /// Cell width.
        dx: f64 = 0.01,
        /// Time step.
        dt: f64 = 0.0005,
        /// Width of the computational window.
        x_window: f64 = 40.0,
        /// split or penalised:<n>.
        scheme: String = "split".into(),
        /// Backward-Euler start-up steps.
        startup_steps: usize = 2,
        /// Time between profile snapshots.
        sample_every: f64 = 1.0,
    }
}

pub fn pde(args: &PdeArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    let params = flow_params(cfg.dx, cfg.dt, cfg.x_window, &cfg.scheme, cfg.startup_steps)?;
    if !(cfg.t > 0.0) || !(cfg.sample_every > 0.0) {
        return Err(usage("need t > 0 and sample_every > 0"));
    }
    let u0 = parse_tail(&cfg.init)?;
    let mut out = start("pde", &cfg.out, &cfg)?;
    let traj = fbpde::solve(&u0, cfg.t, params, cfg.sample_every)?;
    let mut profiles = String::from("t,x,u\n");
    for p in &traj.profiles {
        for (i, v) in p.u.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(profiles, "{},{},{}", p.t, p.centre(i), v);
            }
        }
    }
    out.write("profile_t.csv", &profiles)?;
    // every step: killed paths read this back and need the early times
    out.write("boundary.csv", &traj.boundary_csv(1))?;
    out.finish("pde")?;
    let last = traj.final_profile();
    let target = TravellingWave::minimal().median_centred();
    let tail = last.shifted(-last.median()).tail();
    Ok(summary(json!({
        "t": last.t,
        "boundary": last.boundary,
        "boundary_over_t": last.boundary / last.t,
        "mass": last.mass(),
        "sup_to_median_centred_wave": fbpde::sup_to(&tail, &target),
    })))
}

config! {
    WaveDumpArgs => WaveDumpConfig {
        /// Wave speed, at least √2.
        c: f64 = SQRT2,
        /// Right end of the table.
        xmax: f64 = 20.0,
        /// Table spacing.
        dx: f64 = 0.01,
    }
}

pub fn wave_dump(args: &WaveDumpArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    if !(cfg.dx > 0.0) || !(cfg.xmax > 0.0) {
        return Err(usage("need dx > 0 and xmax > 0"));
    }
    let w = TravellingWave::new(cfg.c)?;
    let mut out = start("wave", &cfg.out, &cfg)?;
    let steps = (cfg.xmax / cfg.dx).round() as usize;
    let mut csv = String::from("x,density,tail\n");
    for k in 0..=steps {
        let x = k as f64 * cfg.dx;
        let _ = writeln!(csv, "{},{},{}", x, w.density(x), w.tail(x));
    }
    out.write("wave.csv", &csv)?;
    out.finish("wave")?;
    Ok(summary(json!({
        "c": cfg.c,
        "rows": steps + 1,
        "mean": w.mean(),
        "median": w.median(),
    })))
}

config! {
    CoupleArgs => CoupleConfig {
        /// Number of particles in each system.
        n: usize = 256,
        /// Initial condition of the first system.
        init_a: String = "pimin".into(),
        /// Initial condition of the second system.
        init_b: String = "zero".into(),
        /// Comma-separated observation times.
        #[arg(value_delimiter = ',')]
        t: Vec<f64> = vec![0.5, 1.0, 2.0],
        /// Independent coupled runs.
        replicas: usize = 32,
        /// full (re-match after every jump) or literal.
        mode: String = "full".into(),
    }
}

pub fn couple(args: &CoupleArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    if cfg.n < 2 || cfg.replicas < 2 || cfg.t.is_empty() {
        return Err(usage("need n ≥ 2, replicas ≥ 2 and at least one time"));
    }
    let a: InitialCondition = parse(&cfg.init_a)?;
    let b: InitialCondition = parse(&cfg.init_b)?;
    let mode: CouplingMode = parse(&cfg.mode)?;
    let mut times = cfg.t.clone();
    times.sort_by(f64::total_cmp);
    let mut out = start("couple", &cfg.out, &cfg)?;
    let rows = contraction_estimate(cfg.n, &a, &b, &times, cfg.replicas, cfg.seed, mode)?;
    let mut csv = String::from("t,lhs,rhs,margin,std_error,holds\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.t, r.lhs, r.rhs, r.margin, r.std_error, r.holds);
    }
    out.write("contraction.csv", &csv)?;
    out.finish("couple")?;
    Ok(summary(json!({
        "rows": rows,
        "holds": rows.iter().all(|r| r.holds),
    })))
}

config! {
    KilledArgs => KilledConfig {
        /// Boundary CSV (t,L columns); solved from the initial tail if absent.
        boundary: Option<String> = None,
        /// Initial tail: heaviside, pimin, pic:<c>, exp:<λ> or file:<csv>.
        init: String = "heaviside".into(),
        /// Query time.
        t: f64 = 3.0,
        /// Number of paths.
        paths: usize = 10_000,
        /// Euler step.
        dt: f64 = 1e-3,
    }
}

pub fn killedbm(args: &KilledArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    if !(cfg.t > 0.0) || !(cfg.dt > 0.0) || cfg.paths == 0 {
        return Err(usage("need t > 0, dt > 0 and paths ≥ 1"));
    }
    let u0 = parse_tail(&cfg.init)?;
    let (boundary, profile) = match &cfg.boundary {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
            let b = BoundaryPath::from_csv(&text)?;
            if b.t_max() < cfg.t - 1e-9 {
                return Err(usage(format!("boundary ends at {} before t = {}", b.t_max(), cfg.t)));
            }
            (b, None)
        }
        None => {
            let traj = fbpde::solve(&u0, cfg.t, FlowParams::default(), cfg.t)?;
            (BoundaryPath::from_trajectory(&traj)?, Some(traj.final_profile().clone()))
        }
    };
    let mut kp = KilledParams::new(cfg.t, cfg.paths, cfg.seed);
    kp.dt = cfg.dt;
    if matches!(u0, InitialTail::Heaviside(_)) {
        kp = kp.for_point_mass();
    }
    let mut out = start("killedbm", &cfg.out, &cfg)?;
    let samples = simulate_killed(&u0, &boundary, &kp)?;
    let mut tau = String::from("path,tau\n");
    let mut surv = String::from("path,x\n");
    for (i, s) in samples.iter().enumerate() {
        if let Some(t) = s.tau {
            let _ = writeln!(tau, "{i},{t}");
        }
        if let Some(x) = s.position {
            let _ = writeln!(surv, "{i},{x}");
        }
    }
    out.write("tau.csv", &tau)?;
    out.write("survivors.csv", &surv)?;
    out.finish("killedbm")?;
    let n_killed = samples.iter().filter(|s| s.tau.is_some()).count();
    let report = if n_killed >= MIN_KILLED {
        Some(killing_time_test(&samples, cfg.t)?)
    } else {
        None
    };
    let histogram = match &profile {
        Some(p) if n_killed < samples.len() => Some(survivor_histogram(&samples, p, 0.25)?),
        _ => None,
    };
    Ok(summary(json!({
        "paths": samples.len(),
        "killed": n_killed,
        "killing_test": report,
        "survivor_histogram": histogram,
    })))
}

config! {
    ConjectureArgs => ConjectureConfig {
        /// Rate λ of the initial tail e^{−λx} ∧ 1.
        rate: f64 = 1.0,
        /// Final time.
        t: f64 = 20.0,
        /// Cell width.
        dx: f64 = 0.01,
        /// Time step.
        dt: f64 = 0.0005,
        /// Width of the computational window.
        x_window: f64 = 40.0,
    }
}

pub fn conjecture(args: &ConjectureArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    if !(cfg.t >= 1.0) {
        return Err(usage("need t ≥ 1"));
    }
    let params = flow_params(cfg.dx, cfg.dt, cfg.x_window, "split", FlowParams::default().startup_steps)?;
    let mut out = start("conjecture", &cfg.out, &cfg)?;
    let r = fbpde::conjecture_experiment(cfg.rate, cfg.t, params)?;
    let mut csv = String::from("t,L,L_over_t,sup_distance\n");
    for (&(t, l, v), &(_, d)) in r.speed_curve.iter().zip(&r.sup_distance) {
        let _ = writeln!(csv, "{t},{l},{v},{d}");
    }
    out.write("conjecture.csv", &csv)?;
    out.finish("conjecture")?;
    let last = r.speed_curve.last().copied();
    Ok(summary(json!({
        "rate": cfg.rate,
        "final_speed": last.map(|x| x.2),
        "final_sup_distance": r.sup_distance.last().map(|x| x.1),
    })))
}

config! {
    VerifyArgs => VerifyConfig {
        /// Property suite to run; only quick exists.
        suite: String = "quick".into(),
    }
}

pub fn verify(args: &VerifyArgs) -> Result<Summary, Failure> {
    let cfg = resolve(args)?;
    if cfg.suite != "quick" {
        return Err(usage(format!("unknown suite {:?}", cfg.suite)));
    }
    let mut out = start("verify", &cfg.out, &cfg)?;
    let checks = quick_suite(cfg.seed);
    out.write_json("verify.json", &checks)?;
    out.finish("verify")?;
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}::{} {}", c.module, c.name, c.detail))
        .collect();
    if !failed.is_empty() {
        return Err(Failure::Numerical(anyhow::anyhow!("failed checks: {}", failed.join("; "))));
    }
    Ok(summary(json!({ "checks": checks.len(), "passed": checks.len() })))
}
