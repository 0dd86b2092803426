//! Small numerical helpers shared across modules.

use std::f64::consts::PI;

use nalgebra::SVector;

/// Wraps an angle difference into `(−π, π]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Wraps into `(−½, ½]`.
#[inline]
pub fn wrap_half(x: f64) -> f64 {
    let mut y = x.rem_euclid(1.0);
    if y > 0.5 {
        y -= 1.0;
    }
    y
}

/// Periodic (trigonometric) interpolation kernel for `n` equispaced samples,
/// evaluated at offset `x` measured in sample spacings.
fn periodic_kernel(n: usize, x: f64) -> f64 {
    let nf = n as f64;
    let s = (PI * x / nf).sin();
    if s.abs() < 1e-14 {
        // x is a multiple of n (the kernel equals 1) or of n with sign flips
        let k = (x / nf).round() as i64;
        return if n.is_multiple_of(2) && k % 2 != 0 { -1.0 } else { 1.0 };
    }
    if n.is_multiple_of(2) {
        (PI * x).sin() * (PI * x / nf).cos() / (nf * s)
    } else {
        (PI * x).sin() / (nf * s)
    }
}

/// Evaluates the trigonometric interpolant of periodic `samples` (taken at
/// phases `j / n`) at phase `u` (any real, period 1).
pub fn periodic_interpolate<const D: usize>(samples: &[SVector<f64, D>], u: f64) -> SVector<f64, D> {
    let n = samples.len();
    let x = u.rem_euclid(1.0) * n as f64;
    let nearest = x.round();
    if (x - nearest).abs() < 1e-13 {
        return samples[(nearest as usize) % n];
    }
    let mut acc = SVector::<f64, D>::zeros();
    for (j, s) in samples.iter().enumerate() {
        acc += s * periodic_kernel(n, x - j as f64);
    }
    acc
}

/// Periodic trapezoid rule average of `values`.
pub fn periodic_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut s = 0.0;
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Ordinary least-squares slope and intercept with the residual RMS.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn interpolation_is_exact_for_band_limited_signals() {
        for n in [16usize, 17] {
            let f = |u: f64| {
                let a = 2.0 * PI * u;
                Vector2::new(a.cos() + 0.3 * (3.0 * a).sin(), (2.0 * a).sin())
            };
            let samples: Vec<_> = (0..n).map(|j| f(j as f64 / n as f64)).collect();
            for k in 0..50 {
                let u = k as f64 * 0.0731 - 0.4;
                assert!((periodic_interpolate(&samples, u) - f(u)).norm() < 1e-12, "n={n} u={u}");
            }
        }
    }

    #[test]
    fn wrapping() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_half(0.75) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, i, r) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-14 && r < 1e-14);
    }
}
