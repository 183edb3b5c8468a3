//! Solvers for the free-boundary problem
//!
//! ```text
//! ∂_t u = ½ ∂²_x u + u   for x > L_t,   u(L_t) = 0,   ∫_{L_t}^∞ u = 1,
//! ```
//!
//! in density form (mass-cut splitting) and in integrated form through the
//! penalised equation `∂_t U = ½ ∂²_x U + U − Uⁿ`, together with the
//! stretching order and the comparison checks built on top of them.
//!
//! Both schemes live on a window of fixed width that follows the boundary by
//! whole-cell shifts, so no re-interpolation is ever needed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{
    capped_matching_cost, Dilated, ExpTail, PointMass, Shifted, TailCdf, TailFunction,
};
use crate::waves::TravellingWave;

/// Right-tail mass allowed to fall outside the initial window.
pub const WINDOW_TAIL_TOL: f64 = 1e-10;
/// Mass tolerance of a density profile.
pub const MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Crank–Nicolson diffusion, growth, then cut the left mass back to 1.
    SplitCut,
    /// Penalised equation `½U″ + U − Uⁿ` with exact reaction substeps.
    Penalised,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowParams {
    pub dx: f64,
    pub dt: f64,
    pub x_window: f64,
    pub scheme: Scheme,
    pub n_penalty: u32,
    /// Crank–Nicolson steps replaced by two implicit half-steps each at start.
    pub startup_steps: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            dx: 0.01,
            dt: 0.0005,
            x_window: 40.0,
            scheme: Scheme::SplitCut,
            n_penalty: 64,
            startup_steps: 2,
        }
    }
}

impl FlowParams {
    pub fn penalised(n: u32) -> Self {
        Self {
            scheme: Scheme::Penalised,
            n_penalty: n,
            ..Self::default()
        }
    }

    /// Largest admissible step: half a cell, so a boundary moving at speed
    /// up to 2 crosses at most one cell per step.
    pub fn dt_max(dx: f64) -> f64 {
        0.5 * dx
    }

    /// `2·dx`.
    pub fn tol_stretch(&self) -> f64 {
        2.0 * self.dx
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidArgument("dx and dt must be positive".into()));
        }
        if self.dt > Self::dt_max(self.dx) {
            return Err(Error::InvalidArgument(format!(
                "dt {} exceeds dt_max {}",
                self.dt,
                Self::dt_max(self.dx)
            )));
        }
        if !(self.x_window >= 100.0 * self.dx) {
            return Err(Error::InvalidArgument("window must span at least 100 cells".into()));
        }
        if self.scheme == Scheme::Penalised && self.n_penalty < 2 {
            return Err(Error::InvalidArgument("n_penalty must be at least 2".into()));
        }
        Ok(())
    }

    fn cells(&self) -> usize {
        (self.x_window / self.dx).round() as usize
    }
}

/// Initial data accepted by the solvers and the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialTail {
    /// Point mass `δ_a`.
    Heaviside(f64),
    /// `Π_c` moved right by `shift` and dilated by `scale` about its boundary.
    Wave { speed: f64, shift: f64, scale: f64 },
    /// `e^{−λ(x − shift)} ∧ 1`.
    Exp { rate: f64, shift: f64 },
    Grid(TailCdf),
}

impl InitialTail {
    pub fn heaviside() -> Self {
        InitialTail::Heaviside(0.0)
    }

    pub fn pi_min() -> Self {
        InitialTail::wave(crate::waves::SQRT2)
    }

    pub fn wave(speed: f64) -> Self {
        InitialTail::Wave {
            speed,
            shift: 0.0,
            scale: 1.0,
        }
    }

    pub fn exp(rate: f64) -> Self {
        InitialTail::Exp { rate, shift: 0.0 }
    }

    pub fn shifted(self, c: f64) -> Self {
        match self {
            InitialTail::Heaviside(a) => InitialTail::Heaviside(a + c),
            InitialTail::Wave { speed, shift, scale } => InitialTail::Wave {
                speed,
                shift: shift + c,
                scale,
            },
            InitialTail::Exp { rate, shift } => InitialTail::Exp { rate, shift: shift + c },
            InitialTail::Grid(g) => InitialTail::Grid(g.shifted(c)),
        }
    }

    /// Parse `heaviside`, `pimin`, `pic:<c>`, `exp:<λ>`; `file:<csv>` is
    /// resolved by the caller.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown initial profile {s:?}"));
        match s {
            "heaviside" | "delta" => return Ok(Self::heaviside()),
            "pimin" => return Ok(Self::pi_min()),
            _ => {}
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "pic" => {
                let c: f64 = arg.parse().map_err(|_| bad())?;
                TravellingWave::new(c)?;
                Ok(Self::wave(c))
            }
            "exp" => {
                let rate: f64 = arg.parse().map_err(|_| bad())?;
                ExpTail::new(rate)?;
                Ok(Self::exp(rate))
            }
            _ => Err(bad()),
        }
    }

    fn with<R>(&self, f: impl FnOnce(&dyn TailFunction) -> R) -> R {
        match self {
            InitialTail::Heaviside(a) => f(&PointMass { at: *a }),
            InitialTail::Wave { speed, shift, scale } => {
                let w = TravellingWave::new(*speed).expect("validated speed");
                f(&Shifted {
                    inner: Dilated { inner: w, scale: *scale },
                    shift: *shift,
                })
            }
            InitialTail::Exp { rate, shift } => f(&Shifted {
                inner: ExpTail { rate: *rate },
                shift: *shift,
            }),
            InitialTail::Grid(g) => f(g),
        }
    }
}

impl TailFunction for InitialTail {
    fn tail(&self, x: f64) -> f64 {
        self.with(|t| t.tail(x))
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.with(|t| t.integral(a, b))
    }
    fn upper_integral(&self, a: f64) -> Option<f64> {
        self.with(|t| t.upper_integral(a))
    }
    fn lower_deficit(&self, b: f64) -> Option<f64> {
        self.with(|t| t.lower_deficit(b))
    }
    fn quantile(&self, y: f64) -> Result<f64> {
        self.with(|t| t.quantile(y))
    }
}

impl TailFunction for &dyn TailFunction {
    fn tail(&self, x: f64) -> f64 {
        (**self).tail(x)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        (**self).integral(a, b)
    }
    fn upper_integral(&self, a: f64) -> Option<f64> {
        (**self).upper_integral(a)
    }
    fn lower_deficit(&self, b: f64) -> Option<f64> {
        (**self).lower_deficit(b)
    }
    fn quantile(&self, y: f64) -> Result<f64> {
        (**self).quantile(y)
    }
}

/// Density on the cells `[x0 + i·dx, x0 + (i+1)·dx)`, as cell averages.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub t: f64,
    pub boundary: f64,
    pub x0: f64,
    pub dx: f64,
    pub u: Vec<f64>,
}

impl Profile {
    pub fn mass(&self) -> f64 {
        self.u.iter().sum::<f64>() * self.dx
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn centre(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    /// Cell average at `x`, 0 outside the window.
    pub fn density_at(&self, x: f64) -> f64 {
        let i = ((x - self.x0) / self.dx).floor();
        if i < 0.0 || i as usize >= self.u.len() {
            0.0
        } else {
            self.u[i as usize]
        }
    }

    /// Integrated form: `1` at the boundary, then the exact tail at every
    /// cell edge to its right.
    pub fn tail(&self) -> TailCdf {
        let n = self.u.len();
        let mut acc = vec![0.0; n + 1];
        for i in (0..n).rev() {
            acc[i] = acc[i + 1] + self.u[i] * self.dx;
        }
        let total = acc[0];
        let mut grid = vec![self.boundary];
        let mut values = vec![1.0];
        for (i, &a) in acc.iter().enumerate() {
            let e = self.edge(i);
            if e > self.boundary + 1e-12 * self.dx {
                grid.push(e);
                values.push((a / total).min(*values.last().unwrap()));
            }
        }
        if grid.len() == 1 {
            grid.push(self.boundary + self.dx);
            values.push(0.0);
        }
        let last = values.len() - 1;
        values[last] = 0.0;
        TailCdf::new(grid, values).expect("profile tail is a valid TailCdf")
    }

    pub fn median(&self) -> f64 {
        self.tail().quantile(0.5).expect("level in range")
    }

    /// Same profile, translated by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            boundary: self.boundary + c,
            x0: self.x0 + c,
            ..self.clone()
        }
    }

    /// `n` atoms at the quantile levels `(k + ½)/n`.
    pub fn quantile_atoms(&self, n: usize) -> Vec<f64> {
        let tail = self.tail();
        (0..n)
            .map(|k| tail.quantile(1.0 - (k as f64 + 0.5) / n as f64).expect("level in range"))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("x,u\n");
        for (i, v) in self.u.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(s, "{},{}", self.centre(i), v);
            }
        }
        s
    }
}

/// Thomas algorithm for a tridiagonal system with constant off-diagonals
/// `off` and diagonal `diag`, except the two corner entries `corner`.
/// Solves in place; `scratch` must have the length of `rhs`.
fn solve_tridiag(off: f64, diag: f64, corner: f64, rhs: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    let d = |i: usize| if i == 0 || i == n - 1 { corner } else { diag };
    let mut beta = d(0);
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = off / beta;
        beta = d(i) - off * scratch[i];
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}

/// One diffusion step of `½∂²_x` over `dt` with mesh `dx`. `odd_ends` selects
/// zero Dirichlet data half a cell outside (cell-centred ghosts); otherwise the
/// data sit on the first and last entries, which are held fixed.
fn diffuse(v: &mut [f64], scratch: &mut [f64], dt: f64, dx: f64, implicit: bool, odd_ends: bool) {
    let r = 0.5 * dt / (dx * dx);
    let (lo, hi) = if odd_ends { (0, v.len()) } else { (1, v.len() - 1) };
    let n = hi - lo;
    if n == 0 {
        return;
    }
    let left = if odd_ends { 0.0 } else { v[0] };
    let right = if odd_ends { 0.0 } else { v[v.len() - 1] };
    let (theta, corner_extra) = (if implicit { 1.0 } else { 0.5 }, if odd_ends { 1.0 } else { 0.0 });
    let a = theta * r;
    let b = (1.0 - theta) * r;
    // explicit part of the right-hand side
    let mut prev = if odd_ends { -v[lo] } else { left };
    for i in lo..hi {
        let next = if i + 1 < hi {
            v[i + 1]
        } else if odd_ends {
            -v[i]
        } else {
            right
        };
        let cur = v[i];
        scratch[i] = cur + b * (prev - 2.0 * cur + next);
        prev = cur;
    }
    // implicit boundary data move to the right-hand side
    if !odd_ends {
        scratch[lo] += a * left;
        scratch[hi - 1] += a * right;
    }
    v[lo..hi].copy_from_slice(&scratch[lo..hi]);
    let diag = 1.0 + 2.0 * a;
    let corner = diag + a * corner_extra;
    let corner = if n == 1 && odd_ends { 1.0 + 4.0 * a } else { corner };
    solve_tridiag(-a, diag, corner, &mut v[lo..hi], &mut scratch[lo..hi]);
}

/// Mass-cut splitting solver in density form.
#[derive(Debug, Clone)]
pub struct SplitCut {
    params: FlowParams,
    /// Window origin in cells.
    offset: i64,
    u: Vec<f64>,
    scratch: Vec<f64>,
    boundary: f64,
    steps: u64,
    dropped_mass: f64,
}

fn place_window(l0: f64, p: &FlowParams) -> i64 {
    ((l0 - 0.25 * p.x_window) / p.dx).floor() as i64
}

fn initial_boundary(u0: &dyn TailFunction) -> Result<f64> {
    let l0 = u0.quantile(1.0)?;
    if !l0.is_finite() {
        return Err(Error::BoundaryUndefined(l0));
    }
    Ok(l0)
}

impl SplitCut {
    pub fn new(u0: &dyn TailFunction, params: FlowParams) -> Result<Self> {
        params.validate()?;
        let l0 = initial_boundary(u0)?;
        let n = params.cells();
        let offset = place_window(l0, &params);
        let edge = |i: usize| (offset + i as i64) as f64 * params.dx;
        let right = u0.tail(edge(n));
        if right > WINDOW_TAIL_TOL {
            return Err(Error::InvalidArgument(format!(
                "initial mass {right:e} beyond the window; increase x_window"
            )));
        }
        let mut u = vec![0.0; n];
        let mut prev = u0.tail(edge(0));
        for (i, ui) in u.iter_mut().enumerate() {
            let next = u0.tail(edge(i + 1));
            *ui = (prev - next).max(0.0);
            prev = next;
        }
        let total: f64 = u.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidTail("no mass inside the window".into()));
        }
        let first = u.iter().position(|&m| m > 0.0).unwrap_or(0);
        for m in &mut u {
            *m /= total * params.dx;
        }
        Ok(Self {
            params,
            offset,
            scratch: vec![0.0; n],
            u,
            boundary: l0.min(edge(first)),
            steps: 0,
            dropped_mass: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }

    pub fn boundary(&self) -> f64 {
        self.boundary
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    /// Mass discarded by window shifts so far.
    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    fn x0(&self) -> f64 {
        self.offset as f64 * self.params.dx
    }

    pub fn step(&mut self) -> Result<()> {
        let p = self.params;
        if (self.steps as usize) < p.startup_steps {
            for _ in 0..2 {
                diffuse(&mut self.u, &mut self.scratch, 0.5 * p.dt, p.dx, true, true);
            }
        } else {
            diffuse(&mut self.u, &mut self.scratch, p.dt, p.dx, false, true);
        }
        let g = p.dt.exp();
        for v in &mut self.u {
            *v *= g;
        }
        self.cut()?;
        self.steps += 1;
        self.recentre_window();
        Ok(())
    }

    fn cut(&mut self) -> Result<()> {
        let dx = self.params.dx;
        let total: f64 = self.u.iter().sum::<f64>() * dx;
        if !(total >= 1.0) {
            return Err(Error::SchemeBlowup(total));
        }
        let mut acc = 0.0;
        let mut j = self.u.len();
        while j > 0 {
            j -= 1;
            let m = self.u[j].max(0.0) * dx;
            if acc + m >= 1.0 {
                let keep = 1.0 - acc;
                let frac = if m > 0.0 { keep / m } else { 0.0 };
                self.boundary = self.x0() + (j as f64 + 1.0 - frac) * dx;
                self.u[j] = keep / dx;
                break;
            }
            acc += m;
        }
        for v in &mut self.u[..j] {
            *v = 0.0;
        }
        for v in &mut self.u[j..] {
            *v = v.max(0.0);
        }
        Ok(())
    }

    fn recentre_window(&mut self) {
        let w = self.params.x_window;
        let dx = self.params.dx;
        let rel = self.boundary - self.x0();
        if rel > 0.1 * w && rel < 0.4 * w {
            return;
        }
        let s = ((rel - 0.25 * w) / dx).round() as i64;
        let n = self.u.len();
        let k = s.unsigned_abs() as usize;
        if k == 0 {
            return;
        }
        if s > 0 {
            self.u.rotate_left(k.min(n));
            for v in &mut self.u[n - k.min(n)..] {
                *v = 0.0;
            }
        } else {
            self.dropped_mass += self.u[n - k.min(n)..].iter().sum::<f64>() * dx;
            self.u.rotate_right(k.min(n));
            for v in &mut self.u[..k.min(n)] {
                *v = 0.0;
            }
        }
        self.offset += s;
    }

    pub fn profile(&self) -> Profile {
        Profile {
            t: self.time(),
            boundary: self.boundary,
            x0: self.x0(),
            dx: self.params.dx,
            u: self.u.clone(),
        }
    }
}

/// Penalised solver for `∂_t U = ½∂²_x U + U − Uⁿ` on nodes, with `U = 1`
/// and `U = 0` imposed at the window ends.
#[derive(Debug, Clone)]
pub struct Penalised {
    params: FlowParams,
    offset: i64,
    v: Vec<f64>,
    scratch: Vec<f64>,
    steps: u64,
}

impl Penalised {
    pub fn new(u0: &dyn TailFunction, params: FlowParams) -> Result<Self> {
        params.validate()?;
        let l0 = initial_boundary(u0)?;
        let n = params.cells();
        let offset = place_window(l0, &params);
        let node = |i: usize| (offset + i as i64) as f64 * params.dx;
        if u0.tail(node(n)) > WINDOW_TAIL_TOL {
            return Err(Error::InvalidArgument(
                "initial mass beyond the window; increase x_window".into(),
            ));
        }
        let mut v: Vec<f64> = (0..=n).map(|i| u0.tail(node(i)).clamp(0.0, 1.0)).collect();
        v[0] = 1.0;
        v[n] = 0.0;
        Ok(Self {
            params,
            offset,
            scratch: vec![0.0; n + 1],
            v,
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }

    fn node(&self, i: usize) -> f64 {
        (self.offset + i as i64) as f64 * self.params.dx
    }

    /// Rightmost node with `U ≥ 1 − 10·dx`.
    pub fn boundary(&self) -> f64 {
        let thr = 1.0 - 10.0 * self.params.dx;
        let k = self.v.iter().position(|&x| x < thr).unwrap_or(self.v.len());
        self.node(k.saturating_sub(1))
    }

    pub fn step(&mut self) -> Result<()> {
        let p = self.params;
        if (self.steps as usize) < p.startup_steps {
            for _ in 0..2 {
                diffuse(&mut self.v, &mut self.scratch, 0.5 * p.dt, p.dx, true, false);
            }
        } else {
            diffuse(&mut self.v, &mut self.scratch, p.dt, p.dx, false, false);
        }
        // exact flow of U' = U − Uⁿ
        let m = (p.n_penalty - 1) as f64;
        let decay = (-m * p.dt).exp();
        for x in &mut self.v {
            let u0 = x.clamp(0.0, 1.0);
            if u0 > 0.0 {
                let pw = u0.powf(m);
                *x = u0 * (pw * (1.0 - decay) + decay).powf(-1.0 / m);
            } else {
                *x = 0.0;
            }
            if !x.is_finite() {
                return Err(Error::SchemeBlowup(*x));
            }
        }
        self.steps += 1;
        self.recentre_window();
        Ok(())
    }

    fn recentre_window(&mut self) {
        let w = self.params.x_window;
        let rel = self.boundary() - self.node(0);
        if rel > 0.1 * w && rel < 0.4 * w {
            return;
        }
        let s = ((rel - 0.25 * w) / self.params.dx).round() as i64;
        let n = self.v.len();
        let k = (s.unsigned_abs() as usize).min(n - 1);
        if k == 0 {
            return;
        }
        if s > 0 {
            self.v.rotate_left(k);
            for x in &mut self.v[n - k..] {
                *x = 0.0;
            }
        } else {
            self.v.rotate_right(k);
            for x in &mut self.v[..k] {
                *x = 1.0;
            }
            self.v[n - 1] = 0.0;
        }
        self.offset += s;
    }

    /// Node values made non-increasing by a running minimum.
    pub fn tail(&self) -> TailCdf {
        let grid: Vec<f64> = (0..self.v.len()).map(|i| self.node(i)).collect();
        let mut values = Vec::with_capacity(self.v.len());
        let mut run: f64 = 1.0;
        for &x in &self.v {
            run = run.min(x.clamp(0.0, 1.0));
            values.push(run);
        }
        values[0] = 1.0;
        TailCdf::new(grid, values).expect("penalised tail is valid")
    }

    pub fn profile(&self) -> Profile {
        let tail = self.tail();
        let vals = tail.values();
        let dx = self.params.dx;
        let u = vals.windows(2).map(|w| (w[0] - w[1]) / dx).collect();
        Profile {
            t: self.time(),
            boundary: self.boundary(),
            x0: self.node(0),
            dx,
            u,
        }
    }
}

/// Either solver behind one interface.
#[derive(Debug, Clone)]
pub enum Flow {
    Split(SplitCut),
    Penalised(Penalised),
}

impl Flow {
    pub fn new(u0: &dyn TailFunction, params: FlowParams) -> Result<Self> {
        Ok(match params.scheme {
            Scheme::SplitCut => Flow::Split(SplitCut::new(u0, params)?),
            Scheme::Penalised => Flow::Penalised(Penalised::new(u0, params)?),
        })
    }

    pub fn params(&self) -> &FlowParams {
        match self {
            Flow::Split(s) => &s.params,
            Flow::Penalised(s) => &s.params,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Flow::Split(s) => s.time(),
            Flow::Penalised(s) => s.time(),
        }
    }

    pub fn boundary(&self) -> f64 {
        match self {
            Flow::Split(s) => s.boundary(),
            Flow::Penalised(s) => s.boundary(),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        match self {
            Flow::Split(s) => s.step(),
            Flow::Penalised(s) => s.step(),
        }
    }

    /// Step while the next step ends no later than `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.time() - 1e-12 {
            return Err(Error::TimeReversal {
                from: self.time(),
                to: t,
            });
        }
        let dt = self.params().dt;
        while self.time() + dt <= t + 1e-9 * dt {
            self.step()?;
        }
        Ok(())
    }

    pub fn tail(&self) -> TailCdf {
        match self {
            Flow::Split(s) => s.profile().tail(),
            Flow::Penalised(s) => s.tail(),
        }
    }

    pub fn profile(&self) -> Profile {
        match self {
            Flow::Split(s) => s.profile(),
            Flow::Penalised(s) => s.profile(),
        }
    }
}

/// Boundary trace and sampled states of one solve.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    /// `(t, L_t)` after every step, starting at `t = 0`.
    pub boundary: Vec<(f64, f64)>,
    pub profiles: Vec<Profile>,
}

impl FlowTrajectory {
    pub fn final_profile(&self) -> &Profile {
        self.profiles.last().expect("at least the initial profile")
    }

    pub fn boundary_at(&self, t: f64) -> f64 {
        let k = self.boundary.partition_point(|&(s, _)| s < t - 1e-12);
        self.boundary[k.min(self.boundary.len() - 1)].1
    }

    /// `t, L_t, L_t/t` every `every` steps.
    pub fn boundary_csv(&self, every: usize) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("t,L,L_over_t\n");
        for &(t, l) in self.boundary.iter().step_by(every.max(1)) {
            let ratio = if t > 0.0 { l / t } else { f64::NAN };
            let _ = writeln!(s, "{t},{l},{ratio}");
        }
        s
    }
}

/// Solve from `u0` to `t_end`, storing profiles at `t = 0` and then every
/// `sample_every` time units (always including `t_end`).
pub fn solve(u0: &dyn TailFunction, t_end: f64, params: FlowParams, sample_every: f64) -> Result<FlowTrajectory> {
    let mut flow = Flow::new(u0, params)?;
    let mut boundary = vec![(0.0, flow.boundary())];
    let mut profiles = vec![flow.profile()];
    let dt = params.dt;
    let every = if sample_every > 0.0 {
        ((sample_every / dt).round() as u64).max(1)
    } else {
        u64::MAX
    };
    let total = (t_end / dt + 1e-9).floor() as u64;
    for k in 1..=total {
        flow.step()?;
        boundary.push((flow.time(), flow.boundary()));
        if k % every == 0 || k == total {
            profiles.push(flow.profile());
        }
    }
    Ok(FlowTrajectory { boundary, profiles })
}

/// Density-form solve with the mass-cut splitting.
pub fn solve_density(u0: &dyn TailFunction, t_end: f64, params: FlowParams, sample_every: f64) -> Result<FlowTrajectory> {
    solve(
        u0,
        t_end,
        FlowParams {
            scheme: Scheme::SplitCut,
            ..params
        },
        sample_every,
    )
}

/// Integrated-form solve with the scheme selected in `params`; returns
/// `(t, U_t)` at the sample times and the boundary trace.
pub fn solve_cdf(u0: &TailCdf, t_end: f64, params: FlowParams, sample_every: f64) -> Result<(Vec<(f64, TailCdf)>, Vec<(f64, f64)>)> {
    let traj = solve(u0, t_end, params, sample_every)?;
    let tails = traj.profiles.iter().map(|p| (p.t, p.tail())).collect();
    Ok((tails, traj.boundary))
}

/// `Φ_t(μ₀)`: the solution at time `t`, recentred so its median is 0.
pub fn flow_phi(u0: &dyn TailFunction, t: f64, params: FlowParams) -> Result<Profile> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("flow time must be positive".into()));
    }
    let mut flow = Flow::new(u0, params)?;
    flow.advance_to(t)?;
    let p = flow.profile();
    let a = p.median();
    Ok(p.shifted(-a))
}

/// Quantile levels of the stretching check: `0.02, 0.04, …, 0.98, 1`.
pub fn stretch_levels() -> Vec<f64> {
    let mut ys: Vec<f64> = (1..50).map(|k| k as f64 * 0.02).collect();
    ys.push(1.0);
    ys
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StretchReport {
    pub holds: bool,
    /// Largest violation found, in `U` units; `≤ 0` when the order holds.
    pub worst_violation: f64,
    /// Level and offset where it occurred.
    pub worst_level: f64,
    pub worst_offset: f64,
}

/// `U ≥_s V` in quantile form: for every level `y`, `U(a^y(U) + x)` lies
/// above `V(a^y(V) + x)` for `x > 0` and below it for `x < 0`. Comparisons are
/// made with a horizontal slack `tol` in favour of the order.
pub fn stretch_check(u: &TailCdf, v: &TailCdf, tol: f64) -> StretchReport {
    const VERTICAL: f64 = 1e-9;
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
    for y in stretch_levels() {
        let au = u.quantile(y).expect("level in range");
        let av = v.quantile(y).expect("level in range");
        let mut xs: Vec<f64> = u
            .grid()
            .iter()
            .map(|g| g - au)
            .chain(v.grid().iter().map(|g| g - av))
            .filter(|x| *x != 0.0)
            .collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for x in xs {
            let viol = if x > 0.0 {
                v.eval(av + x) - u.eval(au + x - tol)
            } else {
                u.eval(au + x + tol) - v.eval(av + x)
            };
            if viol > worst.0 {
                worst = (viol, y, x);
            }
        }
    }
    StretchReport {
        holds: worst.0 <= VERTICAL,
        worst_violation: worst.0,
        worst_level: worst.1,
        worst_offset: worst.2,
    }
}

/// [`stretch_check`] reduced to a yes/no answer.
pub fn stretch_ge(u: &TailCdf, v: &TailCdf, tol: f64) -> bool {
    stretch_check(u, v, tol).holds
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryComparison {
    pub displacement_u: f64,
    pub displacement_v: f64,
    /// `(L^U_t − L^U_0) − (L^V_t − L^V_0)`.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StretchPreservation {
    pub t: f64,
    pub initial: StretchReport,
    pub evolved: StretchReport,
    pub boundary: BoundaryComparison,
}

/// Slack for comparing boundary displacements of two solves.
pub fn boundary_tolerance(p: &FlowParams) -> f64 {
    2.0 * p.dx
}

fn compare_boundaries(fu: &Flow, fv: &Flow, lu0: f64, lv0: f64) -> BoundaryComparison {
    let du = fu.boundary() - lu0;
    let dv = fv.boundary() - lv0;
    let margin = du - dv;
    BoundaryComparison {
        displacement_u: du,
        displacement_v: dv,
        margin,
        holds: margin >= -boundary_tolerance(fu.params()),
    }
}

/// Evolve `U0 ≥_s V0` to time `t` and check that the order and the boundary
/// comparison survive.
pub fn check_stretching_preserved(
    u0: &dyn TailFunction,
    v0: &dyn TailFunction,
    t: f64,
    params: FlowParams,
) -> Result<StretchPreservation> {
    let tol = params.tol_stretch();
    let mut fu = Flow::new(u0, params)?;
    let mut fv = Flow::new(v0, params)?;
    let initial = stretch_check(&fu.tail(), &fv.tail(), tol);
    if !initial.holds {
        return Err(Error::Precondition(format!(
            "initial pair is not ordered (violation {:.3e})",
            initial.worst_violation
        )));
    }
    let (lu0, lv0) = (fu.boundary(), fv.boundary());
    fu.advance_to(t)?;
    fv.advance_to(t)?;
    Ok(StretchPreservation {
        t,
        initial,
        evolved: stretch_check(&fu.tail(), &fv.tail(), tol),
        boundary: compare_boundaries(&fu, &fv, lu0, lv0),
    })
}

/// `L^U_t − L^U_0 ≥ L^V_t − L^V_0` for `U0 ≥_s V0`, within
/// [`boundary_tolerance`].
pub fn check_boundary_comparison(
    u0: &dyn TailFunction,
    v0: &dyn TailFunction,
    t: f64,
    params: FlowParams,
) -> Result<BoundaryComparison> {
    let mut fu = Flow::new(u0, params)?;
    let mut fv = Flow::new(v0, params)?;
    let (lu0, lv0) = (fu.boundary(), fv.boundary());
    fu.advance_to(t)?;
    fv.advance_to(t)?;
    Ok(compare_boundaries(&fu, &fv, lu0, lv0))
}

/// Atoms used to discretise profiles for the capped distance.
pub const SENSITIVITY_ATOMS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub t: f64,
    pub w0: f64,
    pub wt: f64,
    /// `eᵗ · w0`.
    pub bound: f64,
    pub holds: bool,
}

/// Capped distance between two profiles through their quantile atoms.
pub fn profile_distance(a: &Profile, b: &Profile) -> f64 {
    let xa = a.quantile_atoms(SENSITIVITY_ATOMS);
    let xb = b.quantile_atoms(SENSITIVITY_ATOMS);
    capped_matching_cost(&xa, &xb).expect("equal, non-empty, sorted")
}

/// `W(u_t, v_t) ≤ eᵗ W(u_0, v_0)` with 5% slack.
pub fn sensitivity_check(
    u0: &dyn TailFunction,
    v0: &dyn TailFunction,
    t: f64,
    params: FlowParams,
) -> Result<SensitivityReport> {
    let mut fu = Flow::new(u0, params)?;
    let mut fv = Flow::new(v0, params)?;
    let w0 = profile_distance(&fu.profile(), &fv.profile());
    fu.advance_to(t)?;
    fv.advance_to(t)?;
    let wt = profile_distance(&fu.profile(), &fv.profile());
    let bound = t.exp() * w0;
    Ok(SensitivityReport {
        t,
        w0,
        wt,
        bound,
        holds: wt <= 1.05 * bound + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureReport {
    pub rate: f64,
    /// `(t, L_t, L_t/t)` at unit times.
    pub speed_curve: Vec<(f64, f64, f64)>,
    /// `(t, sup |Ũ_t − Π̃_min|)` at unit times, median-centred.
    pub sup_distance: Vec<(f64, f64)>,
}

/// Run from the exponential tail `e^{−λx} ∧ 1` and record the boundary speed
/// and the median-centred distance to `Π̃_min`. Exploratory; nothing is
/// asserted.
pub fn conjecture_experiment(rate: f64, t_end: f64, params: FlowParams) -> Result<ConjectureReport> {
    let u0 = ExpTail::new(rate)?;
    let target = TravellingWave::minimal().median_centred();
    let mut flow = Flow::new(&u0, params)?;
    let mut speed_curve = Vec::new();
    let mut sup_distance = Vec::new();
    let mut t = 1.0;
    while t <= t_end + 1e-9 {
        flow.advance_to(t)?;
        let l = flow.boundary();
        speed_curve.push((flow.time(), l, l / flow.time()));
        let p = flow.profile();
        let tail = p.shifted(-p.median()).tail();
        sup_distance.push((flow.time(), sup_to(&tail, &target)));
        t += 1.0;
    }
    Ok(ConjectureReport {
        rate,
        speed_curve,
        sup_distance,
    })
}

/// `sup_x |U(x) − F(x)|` over the grid of `U` and its cell midpoints.
pub fn sup_to(u: &TailCdf, f: &impl TailFunction) -> f64 {
    let g = u.grid();
    let mut d: f64 = 0.0;
    for i in 0..g.len() {
        d = d.max((u.eval(g[i]) - f.tail(g[i])).abs());
        if i + 1 < g.len() {
            let m = 0.5 * (g[i] + g[i + 1]);
            d = d.max((u.eval(m) - f.tail(m)).abs());
        }
    }
    // just left of the boundary U jumps to 1
    d.max((1.0 - f.tail(g[0] - 1e-12)).abs())
}
