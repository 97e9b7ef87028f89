//! Small numeric helpers: cached FFTs, fractional delay, dB conversions.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT, X[k] = sum x[n] e^{-j2pi kn/N}.
pub fn fft(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse DFT including the 1/N factor.
pub fn ifft(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let s = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

pub fn energy(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn mean_power(x: &[C64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        energy(x) / x.len() as f64
    }
}

pub fn db10(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn db20(x: f64) -> f64 {
    20.0 * x.log10()
}

pub fn from_db10(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn from_db20(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// e^{j 2 pi k / 8}, exact for multiples of 90 degrees.
pub fn root8(k: u64) -> C64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match k % 8 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(h, h),
        2 => C64::new(0.0, 1.0),
        3 => C64::new(-h, h),
        4 => C64::new(-1.0, 0.0),
        5 => C64::new(-h, -h),
        6 => C64::new(0.0, -1.0),
        _ => C64::new(h, -h),
    }
}

/// Number of taps of the fractional-delay interpolator.
pub const FD_TAPS: usize = 32;

fn kaiser_beta() -> f64 {
    8.0
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser-windowed sinc taps for a fractional shift `mu` in [0,1).
/// Tap `i` multiplies x[n - (i - FD_TAPS/2 + 1)], so for mu = 0 the kernel is a unit impulse.
pub fn fd_kernel(mu: f64) -> [f64; FD_TAPS] {
    let mut h = [0.0; FD_TAPS];
    let half = (FD_TAPS / 2) as f64;
    let b = kaiser_beta();
    let i0b = bessel_i0(b);
    for (i, hv) in h.iter_mut().enumerate() {
        // offset of this tap in samples
        let t = i as f64 - half + 1.0 - mu;
        let r = t / half;
        let w = if r.abs() >= 1.0 { 0.0 } else { bessel_i0(b * (1.0 - r * r).sqrt()) / i0b };
        *hv = sinc(t) * w;
    }
    h
}

/// Delays `x` by `delay` samples (may be negative or fractional) and adds
/// `gain * x(t - delay)` into `out` at positions `offset + n`. Samples that
/// fall outside `out` are dropped. Input outside `x` counts as zero.
pub fn add_delayed(out: &mut [C64], x: &[C64], delay: f64, gain: C64) {
    let d_int = delay.floor();
    let mu = delay - d_int;
    let d_int = d_int as i64;
    if mu == 0.0 {
        for (n, &v) in x.iter().enumerate() {
            let m = n as i64 + d_int;
            if m >= 0 && (m as usize) < out.len() {
                out[m as usize] += gain * v;
            }
        }
        return;
    }
    let h = fd_kernel(mu);
    let half = (FD_TAPS / 2) as i64;
    // y[m] = sum_i h[i] x[m - d_int - (i - half + 1)]
    let lo = (d_int + 1 - half).max(0);
    let hi = (x.len() as i64 + d_int + half).min(out.len() as i64);
    for m in lo..hi {
        let mut acc = C64::new(0.0, 0.0);
        for (i, &hv) in h.iter().enumerate() {
            let k = m - d_int - (i as i64 - half + 1);
            if k >= 0 && (k as usize) < x.len() {
                acc += x[k as usize] * hv;
            }
        }
        out[m as usize] += gain * acc;
    }
}
