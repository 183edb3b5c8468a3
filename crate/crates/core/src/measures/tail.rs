use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::{EmpiricalMeasure, TOL_CDF};

/// A non-increasing function `U : ℝ → [0, 1]` with `U(−∞) = 1`, `U(∞) = 0`,
/// read as `U(x) = μ((x, ∞))` for some probability measure `μ`.
pub trait TailFunction {
    fn tail(&self, x: f64) -> f64;

    /// `∫_a^b U`.
    fn integral(&self, a: f64, b: f64) -> f64;

    /// `∫_a^∞ U`, or `None` when it diverges.
    fn upper_integral(&self, a: f64) -> Option<f64>;

    /// `∫_{−∞}^b (1 − U)`, or `None` when it diverges.
    fn lower_deficit(&self, b: f64) -> Option<f64>;

    /// `a^y(U) = inf{x : U(x) < y}` for `y ∈ (0, 1]`.
    fn quantile(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        let mut lo = -1.0;
        while self.tail(lo) < y {
            lo *= 2.0;
            if lo < -1e12 {
                return Ok(f64::NEG_INFINITY);
            }
        }
        let mut hi = 1.0;
        while self.tail(hi) >= y {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InvalidTail("no finite quantile".into()));
            }
        }
        Ok(last_at_least(|x| self.tail(x), y, lo, hi))
    }
}

pub(crate) fn check_level(y: f64) -> Result<()> {
    if y > 0.0 && y <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("quantile level {y} outside (0, 1]")))
    }
}

/// Bisection for the crossing of a non-increasing `f` through `level` on
/// `[lo, hi]`, given `f(lo) ≥ level > f(hi)`.
pub(crate) fn last_at_least(f: impl Fn(f64) -> f64, level: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Tail of `μ` shifted right by `shift`: `x ↦ U(x − shift)`.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<T> {
    pub inner: T,
    pub shift: f64,
}

impl<T: TailFunction> TailFunction for Shifted<T> {
    fn tail(&self, x: f64) -> f64 {
        self.inner.tail(x - self.shift)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.inner.integral(a - self.shift, b - self.shift)
    }
    fn upper_integral(&self, a: f64) -> Option<f64> {
        self.inner.upper_integral(a - self.shift)
    }
    fn lower_deficit(&self, b: f64) -> Option<f64> {
        self.inner.lower_deficit(b - self.shift)
    }
    fn quantile(&self, y: f64) -> Result<f64> {
        Ok(self.inner.quantile(y)? + self.shift)
    }
}

/// Tail of a point mass at `at`: the Heaviside function `𝟙(x < at)`.
#[derive(Debug, Clone, Copy)]
pub struct PointMass {
    pub at: f64,
}

impl TailFunction for PointMass {
    fn tail(&self, x: f64) -> f64 {
        if x < self.at {
            1.0
        } else {
            0.0
        }
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        (b.min(self.at) - a).max(0.0)
    }
    fn upper_integral(&self, a: f64) -> Option<f64> {
        Some((self.at - a).max(0.0))
    }
    fn lower_deficit(&self, b: f64) -> Option<f64> {
        Some((b - self.at).max(0.0))
    }
    fn quantile(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(self.at)
    }
}

/// Exponential tail `U(x) = e^{−λx} ∧ 1`.
#[derive(Debug, Clone, Copy)]
pub struct ExpTail {
    pub rate: f64,
}

impl ExpTail {
    pub fn new(rate: f64) -> Result<Self> {
        if rate > 0.0 && rate.is_finite() {
            Ok(Self { rate })
        } else {
            Err(Error::InvalidArgument(format!("tail rate {rate} must be positive")))
        }
    }
}

impl TailFunction for ExpTail {
    fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            (-self.rate * x).exp()
        }
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let left = (b.min(0.0) - a).max(0.0);
        let s = a.max(0.0);
        let right = if b > s {
            ((-self.rate * s).exp() - (-self.rate * b).exp()) / self.rate
        } else {
            0.0
        };
        left + right
    }
    fn upper_integral(&self, a: f64) -> Option<f64> {
        Some((-a).max(0.0) + (-self.rate * a.max(0.0)).exp() / self.rate)
    }
    fn lower_deficit(&self, b: f64) -> Option<f64> {
        Some(if b <= 0.0 {
            0.0
        } else {
            b + (-self.rate * b).exp_m1() / self.rate
        })
    }
    fn quantile(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(-y.ln() / self.rate)
    }
}

/// Dilation about the origin: `x ↦ U(x / scale)`.
#[derive(Debug, Clone, Copy)]
pub struct Dilated<T> {
    pub inner: T,
    pub scale: f64,
}

impl<T: TailFunction> TailFunction for Dilated<T> {
    fn tail(&self, x: f64) -> f64 {
        self.inner.tail(x / self.scale)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.scale * self.inner.integral(a / self.scale, b / self.scale)
    }
    fn upper_integral(&self, a: f64) -> Option<f64> {
        self.inner.upper_integral(a / self.scale).map(|v| v * self.scale)
    }
    fn lower_deficit(&self, b: f64) -> Option<f64> {
        self.inner.lower_deficit(b / self.scale).map(|v| v * self.scale)
    }
    fn quantile(&self, y: f64) -> Result<f64> {
        Ok(self.inner.quantile(y)? * self.scale)
    }
}

/// Grid-discretised tail CDF, linearly interpolated between grid points,
/// exactly 1 left of the grid and exactly 0 right of it.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCdf {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TailCdf {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::LengthMismatch(grid.len(), values.len()));
        }
        if grid.is_empty() {
            return Err(Error::InvalidTail("empty grid".into()));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTail("non-finite entry".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTail("grid not strictly increasing".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0] + TOL_CDF) {
            return Err(Error::InvalidTail("values increase".into()));
        }
        if values.iter().any(|&v| !(-TOL_CDF..=1.0 + TOL_CDF).contains(&v)) {
            return Err(Error::InvalidTail("value outside [0, 1]".into()));
        }
        if (values[0] - 1.0).abs() > TOL_CDF {
            return Err(Error::InvalidTail(format!("first value {} is not 1", values[0])));
        }
        if values[values.len() - 1].abs() > TOL_CDF {
            return Err(Error::InvalidTail(format!(
                "last value {} is not 0",
                values[values.len() - 1]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Sample a tail function on `grid`, forcing the end values to 1 and 0.
    pub fn sample(f: &impl TailFunction, grid: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        let mut values: Vec<f64> = grid.iter().map(|&x| f.tail(x).clamp(0.0, 1.0)).collect();
        if n > 0 {
            values[0] = 1.0;
            values[n - 1] = 0.0;
        }
        Self::new(grid, values)
    }

    /// Uniform grid on `[lo, hi]` with spacing close to `step`.
    pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        (0..=n).map(|i| lo + i as f64 * h).collect()
    }

    /// Piecewise-linear tail of an empirical measure on a uniform grid.
    pub fn from_empirical(m: &EmpiricalMeasure, step: f64) -> Result<Self> {
        let grid = Self::uniform_grid(m.leftmost() - step, m.atoms()[m.len() - 1] + step, step);
        let values = grid.iter().map(|&x| m.tail(x)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] {
            return 1.0;
        }
        if x >= g[g.len() - 1] {
            return if x == g[g.len() - 1] { self.values[g.len() - 1] } else { 0.0 };
        }
        let i = g.partition_point(|&p| p <= x) - 1;
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// `sup_x |U(x) − V(x)|` sampled on this grid.
    pub fn sup_distance(&self, other: &impl TailFunction) -> f64 {
        self.grid
            .iter()
            .map(|&x| (self.eval(x) - other.tail(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Exact `∫ |U − V|` between two piecewise-linear tails, i.e. the `W₁`
    /// distance of the measures they describe.
    pub fn l1_distance(&self, other: &TailCdf) -> f64 {
        let mut xs: Vec<f64> = self.grid.iter().chain(&other.grid).copied().collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let d: Vec<f64> = xs.iter().map(|&x| self.eval(x) - other.eval(x)).collect();
        let mut total = 0.0;
        for i in 1..xs.len() {
            let h = xs[i] - xs[i - 1];
            let (a, b) = (d[i - 1], d[i]);
            total += if a * b >= 0.0 {
                0.5 * (a.abs() + b.abs()) * h
            } else {
                0.5 * (a * a + b * b) / (a.abs() + b.abs()) * h
            };
        }
        total
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            grid: self.grid.iter().map(|x| x + c).collect(),
            values: self.values.clone(),
        }
    }

    /// First moment `∫ x dμ` of the measure this tail describes.
    pub fn first_moment(&self) -> f64 {
        let g0 = self.grid[0];
        g0 + self.integral(g0, self.grid[self.grid.len() - 1])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,U\n");
        for (x, u) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(s, "{x},{u}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let mut cols = line.split(',');
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::InvalidArgument(format!("bad row {line:?}")));
            };
            match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                (Ok(x), Ok(u)) => {
                    grid.push(x);
                    values.push(u);
                }
                _ if grid.is_empty() => continue, // header
                _ => return Err(Error::InvalidArgument(format!("bad row {line:?}"))),
            }
        }
        Self::new(grid, values)
    }

    fn segment_integral(&self, i: usize, a: f64, b: f64) -> f64 {
        // exact for the linear piece on [grid[i], grid[i+1]]
        let (g0, g1) = (self.grid[i], self.grid[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let at = |x: f64| v0 + (x - g0) / (g1 - g0) * (v1 - v0);
        0.5 * (at(a) + at(b)) * (b - a)
    }
}

impl TailFunction for TailCdf {
    fn tail(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let g = &self.grid;
        let (first, last) = (g[0], g[g.len() - 1]);
        let mut total = 0.0;
        // left of the grid U = 1
        if a < first {
            total += b.min(first) - a;
        }
        let lo = a.max(first);
        let hi = b.min(last);
        if lo < hi {
            let start = g.partition_point(|&p| p <= lo).saturating_sub(1);
            let mut i = start;
            while i + 1 < g.len() && g[i] < hi {
                let s = lo.max(g[i]);
                let e = hi.min(g[i + 1]);
                if e > s {
                    total += self.segment_integral(i, s, e);
                }
                i += 1;
            }
        }
        total
    }

    fn upper_integral(&self, a: f64) -> Option<f64> {
        let last = self.grid[self.grid.len() - 1];
        Some(if a >= last { 0.0 } else { self.integral(a, last) })
    }

    fn lower_deficit(&self, b: f64) -> Option<f64> {
        let first = self.grid[0];
        Some(if b <= first { 0.0 } else { (b - first) - self.integral(first, b) })
    }

    fn quantile(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        let v = &self.values;
        // first index with value < y
        let k = v.partition_point(|&u| u >= y);
        if k == 0 {
            return Ok(self.grid[0]);
        }
        if k == v.len() {
            return Ok(self.grid[v.len() - 1]);
        }
        let (g0, g1) = (self.grid[k - 1], self.grid[k]);
        let (v0, v1) = (v[k - 1], v[k]);
        Ok(g0 + (v0 - y) / (v0 - v1) * (g1 - g0))
    }
}

/// `W₁(μ, F) = ∫ |μ((x,∞)) − F(x)| dx`, integrated exactly between atoms.
///
/// Between consecutive atoms the empirical tail is a constant `h`; since
/// `F` is monotone the integrand changes sign at most once, at the point
/// where `F` crosses `h`, which is located by bisection. The two unbounded
/// pieces use the closed-form tail integrals of `F`.
pub fn w1_to_analytic(mu: &EmpiricalMeasure, f: &impl TailFunction) -> Result<f64> {
    let atoms = mu.atoms();
    let n = atoms.len() as f64;
    let first = atoms[0];
    let last = atoms[atoms.len() - 1];
    let mut total = f.lower_deficit(first).ok_or(Error::InfiniteW1)?;
    total += f.upper_integral(last).ok_or(Error::InfiniteW1)?;

    let mut i = 0;
    while i < atoms.len() {
        let a = atoms[i];
        while i < atoms.len() && atoms[i] == a {
            i += 1;
        }
        if i == atoms.len() {
            break;
        }
        let b = atoms[i];
        let h = (atoms.len() - i) as f64 / n;
        total += segment_abs(f, a, b, h);
    }
    if !total.is_finite() {
        return Err(Error::InfiniteW1);
    }
    Ok(total)
}

/// `∫_a^b |h − F|` for non-increasing `F`.
fn segment_abs(f: &impl TailFunction, a: f64, b: f64, h: f64) -> f64 {
    let cross = if f.tail(a) < h {
        a
    } else if f.tail(b) >= h {
        b
    } else {
        last_at_least(|x| f.tail(x), h, a, b)
    };
    let left = f.integral(a, cross) - h * (cross - a);
    let right = h * (b - cross) - f.integral(cross, b);
    left.max(0.0) + right.max(0.0)
}
