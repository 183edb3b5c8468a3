//! Travelling waves of the free-boundary equation.
//!
//! A wave of speed `c ≥ √2` has profile `π_c` on `x > 0` solving
//! `½φ″ + cφ′ + φ = 0`, `φ(0) = 0`, `∫φ = 1`. With `k = √(c² − 2)`,
//!
//! ```text
//! π_c(x) = 2 e^{−cx} sinh(kx)/k
//! Π_c(x) = e^{−cx} (cosh(kx) + c sinh(kx)/k)
//! ```
//!
//! and `k → 0` recovers the minimal wave `π_min(x) = 2x e^{−√2 x}`. All
//! formulas are written through `sinh(z)/z` so the two cases share code.

use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure, Shifted, TailFunction};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Slack below `√2` still accepted as the critical speed.
pub const SPEED_TOL: f64 = 1e-12;

/// `π_min(x) = 2x e^{−√2x}` for `x > 0`, else 0.
pub fn pi_min(x: f64) -> f64 {
    if x > 0.0 {
        2.0 * x * (-SQRT2 * x).exp()
    } else {
        0.0
    }
}

/// `Π_min(x) = (1 + √2x) e^{−√2x}` for `x ≥ 0`, else 1.
pub fn pi_min_tail(x: f64) -> f64 {
    if x >= 0.0 {
        (1.0 + SQRT2 * x) * (-SQRT2 * x).exp()
    } else {
        1.0
    }
}

fn sinhc(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        1.0 + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sinh() / z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravellingWave {
    speed: f64,
    k: f64,
}

impl TravellingWave {
    pub fn new(speed: f64) -> Result<Self> {
        if !speed.is_finite() || speed < SQRT2 - SPEED_TOL {
            return Err(Error::SubcriticalSpeed(speed));
        }
        let speed = speed.max(SQRT2);
        let k = if speed == SQRT2 { 0.0 } else { (speed * speed - 2.0).max(0.0).sqrt() };
        Ok(Self { speed, k })
    }

    pub fn minimal() -> Self {
        Self { speed: SQRT2, k: 0.0 }
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// `(e^{−cx} cosh(kx), e^{−cx} x sinh(kx)/(kx))` without overflow.
    fn kernels(&self, x: f64) -> (f64, f64) {
        let (c, k) = (self.speed, self.k);
        if k * x < 1.0 {
            let e = (-c * x).exp();
            (e * (k * x).cosh(), e * x * sinhc(k * x))
        } else {
            let slow = (-(c - k) * x).exp();
            let fast = (-(c + k) * x).exp();
            (0.5 * (slow + fast), 0.5 * (slow - fast) / k)
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        2.0 * self.kernels(x).1
    }

    /// `(π, π′, π″)` at `x > 0`, from the closed form.
    pub fn density_derivatives(&self, x: f64) -> (f64, f64, f64) {
        let (c, k) = (self.speed, self.k);
        let (ch, sh) = self.kernels(x);
        // π = 2 e^{−cx} sinh(kx)/k, differentiate the exponential pair
        let p = 2.0 * sh;
        let dp = 2.0 * (ch - c * sh);
        let d2p = 2.0 * ((c * c + k * k) * sh - 2.0 * c * ch);
        (p, dp, d2p)
    }

    pub fn tail_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        let (ch, sh) = self.kernels(x);
        ch + self.speed * sh
    }

    /// `∫_x^∞ Π_c` for `x ≥ 0`.
    fn tail_integral_from(&self, x: f64) -> f64 {
        let (c, k) = (self.speed, self.k);
        let (ch, sh) = self.kernels(x);
        c * ch + 0.5 * (c * c + k * k) * sh
    }

    /// Mean of `π_c`; equals `c`, so `√2` for the minimal wave.
    pub fn mean(&self) -> f64 {
        self.tail_integral_from(0.0)
    }

    /// `a^{1/2}(Π_c)`.
    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("level in range")
    }

    /// Tail recentred so that its median sits at 0 (`Π̃_c`).
    pub fn median_centred(&self) -> Shifted<TravellingWave> {
        Shifted {
            inner: *self,
            shift: -self.median(),
        }
    }

    /// Draw one point by bisection on the inverse tail, to `1e-12`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let level = 1.0 - rng.random::<f64>(); // (0, 1]
        let mut hi = 1.0;
        while self.tail_at(hi) >= level {
            hi *= 2.0;
        }
        let (mut lo, mut hi) = (0.0, hi);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.tail_at(mid) >= level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::from_vec((0..n).map(|_| self.draw(rng)).collect())
    }
}

impl TailFunction for TravellingWave {
    fn tail(&self, x: f64) -> f64 {
        self.tail_at(x)
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let from = |x: f64| {
            if x >= 0.0 {
                self.tail_integral_from(x)
            } else {
                self.tail_integral_from(0.0) - x
            }
        };
        from(a) - from(b)
    }

    fn upper_integral(&self, a: f64) -> Option<f64> {
        Some(if a >= 0.0 {
            self.tail_integral_from(a)
        } else {
            self.tail_integral_from(0.0) - a
        })
    }

    fn quantile(&self, y: f64) -> Result<f64> {
        crate::measures::check_level(y)?;
        if y == 1.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.tail_at(hi) >= y {
            hi *= 2.0;
        }
        Ok(crate::measures::last_at_least(|x| self.tail_at(x), y, 0.0, hi))
    }

    fn lower_deficit(&self, b: f64) -> Option<f64> {
        if b <= 0.0 {
            Some(0.0)
        } else {
            Some(b - self.integral(0.0, b))
        }
    }
}

/// iid sample of size `n` from `π_min`.
pub fn sample_pi_min<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<EmpiricalMeasure> {
    TravellingWave::minimal().sample(rng, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    /// Composite Simpson on `[a, b]` with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn pi_min_examples() {
        assert_eq!(pi_min(0.0), 0.0);
        assert_eq!(pi_min(-1.0), 0.0);
        let peak = 1.0 / SQRT2;
        assert!((pi_min(peak) - SQRT2 / std::f64::consts::E).abs() < 1e-15);
        // grid search oracle for the maximiser
        let best = (1..200_000)
            .map(|i| i as f64 * 1e-5)
            .max_by(|a, b| pi_min(*a).total_cmp(&pi_min(*b)))
            .unwrap();
        assert!((best - peak).abs() < 2e-5);
        assert!((pi_min(peak) - 0.52026).abs() < 1e-5);
        assert!(pi_min(800.0) == 0.0 || pi_min(800.0) < 1e-300);
    }

    #[test]
    fn pi_min_tail_examples() {
        assert_eq!(pi_min_tail(0.0), 1.0);
        assert_eq!(pi_min_tail(-3.0), 1.0);
        let direct = (1.0 + 10.0 * SQRT2) * (-10.0 * SQRT2).exp();
        assert_eq!(pi_min_tail(10.0), direct);
        let quad = simpson(pi_min, 10.0, 60.0, 20_000);
        assert!((quad - direct).abs() < 1e-12);
        // mean: ∫ Π_min = √2
        let mean = simpson(pi_min_tail, 0.0, 60.0, 60_000);
        assert!((mean - SQRT2).abs() < 1e-10);
        assert!((TravellingWave::minimal().mean() - SQRT2).abs() < 1e-15);
    }

    #[test]
    fn densities_integrate_to_one() {
        for c in [SQRT2, 1.5, 2.0, 3.0] {
            let w = TravellingWave::new(c).unwrap();
            let total = simpson(|x| w.density(x), 0.0, 80.0, 160_000);
            assert!((total - 1.0).abs() < 1e-10, "c = {c}: {total}");
            assert_eq!(w.density(0.0), 0.0);
            assert!((w.tail(0.0) - 1.0).abs() < 1e-15);
            assert!((w.mean() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_derivative_is_minus_density() {
        let h = 1e-5;
        for w in [TravellingWave::minimal(), TravellingWave::new(2.0).unwrap()] {
            for i in 1..2000 {
                let x = i as f64 * 0.01;
                let fd = (w.tail(x + h) - w.tail(x - h)) / (2.0 * h);
                assert!((fd + w.density(x)).abs() < 1e-6, "x = {x}");
            }
        }
    }

    #[test]
    fn minimal_wave_matches_general_formula() {
        let w = TravellingWave::new(SQRT2).unwrap();
        for i in 0..500 {
            let x = i as f64 * 0.05;
            assert!((w.density(x) - pi_min(x)).abs() < 1e-15);
            assert!((w.tail(x) - pi_min_tail(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn continuity_in_speed_at_critical() {
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6] {
            let w = TravellingWave::new(SQRT2 + eps).unwrap();
            let sup = (0..4000)
                .map(|i| i as f64 * 0.01)
                .map(|x| (w.density(x) - pi_min(x)).abs())
                .fold(0.0, f64::max);
            assert!(sup < last);
            last = sup;
        }
        assert!(last < 1e-5);
    }

    /// Fourth-order central differences.
    fn fd_residual(f: impl Fn(f64) -> f64, c: f64, x: f64) -> f64 {
        let h = 1e-3;
        let d1 = (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
        let d2 = (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
            / (12.0 * h * h);
        0.5 * d2 + c * d1 + f(x)
    }

    #[test]
    fn wave_ode_residual() {
        for c in [SQRT2, 2.0, 2.5] {
            let w = TravellingWave::new(c).unwrap();
            for i in 1..2000 {
                let x = i as f64 * 0.01;
                let (p, dp, d2p) = w.density_derivatives(x);
                assert!((0.5 * d2p + c * dp + p).abs() < 1e-12);
                if x > 0.01 {
                    assert!(fd_residual(|y| w.density(y), c, x).abs() < 1e-8, "c {c} x {x}");
                }
            }
        }
    }

    #[test]
    fn subcritical_speed_rejected() {
        assert!(matches!(TravellingWave::new(1.0), Err(Error::SubcriticalSpeed(_))));
        assert!(TravellingWave::new(SQRT2 - 1e-13).is_ok());
    }

    #[test]
    fn quantiles() {
        let w = TravellingWave::minimal();
        assert_eq!(w.quantile(1.0).unwrap(), 0.0);
        let m = w.median();
        // bisection oracle directly on the closed form
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (1.0 + SQRT2 * mid) * (-SQRT2 * mid).exp() >= 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((m - lo).abs() < 1e-12);
        assert!((w.median_centred().tail(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampler_is_reproducible_and_unbiased() {
        let a = sample_pi_min(&mut rng_from_seed(5), 5).unwrap();
        let b = sample_pi_min(&mut rng_from_seed(5), 5).unwrap();
        assert_eq!(a, b);

        let n = 200_000;
        let s = sample_pi_min(&mut rng_from_seed(11), n).unwrap();
        // π_min is Gamma(2, rate √2): variance 2/2 = 1
        let sd = 1.0 / (n as f64).sqrt();
        assert!((s.mean() - SQRT2).abs() < 3.0 * sd);
    }

    #[test]
    fn sample_w1_shrinks() {
        let w = TravellingWave::minimal();
        let mut rng = rng_from_seed(3);
        let small = crate::measures::w1_to_analytic(&w.sample(&mut rng, 100).unwrap(), &w).unwrap();
        let big = crate::measures::w1_to_analytic(&w.sample(&mut rng, 100_000).unwrap(), &w).unwrap();
        assert!(big < small);
        assert!(big < 0.01);
    }

    #[test]
    fn w1_of_delta_zero_to_minimal_wave() {
        let d = EmpiricalMeasure::from_positions(&[0.0]).unwrap();
        let v = crate::measures::w1_to_analytic(&d, &TravellingWave::minimal()).unwrap();
        assert!((v - SQRT2).abs() < 1e-14);
        let quad = simpson(pi_min_tail, 0.0, 60.0, 60_000);
        assert!((v - quad).abs() < 1e-10);
    }
}
