//! Analytic reference spectra: Bessel functions of the first kind, their
//! positive zeros, and closed-form Dirichlet spectra of discs and rectangles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ORDER: u32 = 5;
pub const MAX_ARGUMENT: f64 = 100.0;
pub const MAX_ZERO_INDEX: u32 = 10;

/// Below this argument the power series is summed directly; above it the
/// cancellation in the series costs more digits than backward recurrence.
const SERIES_LIMIT: f64 = 8.0;

/// Bessel function of the first kind `J_n(x)`.
///
/// Power series for `x <= 8`, Miller's normalized backward recurrence above.
/// Absolute error stays below `1e-12` on `0 <= x <= 100`, `n <= 5`.
pub fn bessel_j(n: u32, x: f64) -> Result<f64> {
    if n > MAX_ORDER {
        return Err(Error::Oracle(format!("order {n} exceeds {MAX_ORDER}")));
    }
    if !(0.0..=MAX_ARGUMENT).contains(&x) {
        return Err(Error::Oracle(format!("argument {x} outside [0, {MAX_ARGUMENT}]")));
    }
    Ok(if x <= SERIES_LIMIT { series(n, x) } else { miller(n, x) })
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    // (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n as f64));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && k > 2.0 {
            break;
        }
        if term == 0.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn miller(n: u32, x: f64) -> f64 {
    let m = (n as f64).max(x);
    let mut top = (m + 20.0 + (40.0 * m).sqrt()) as usize;
    if top % 2 == 1 {
        top += 1;
    }
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=top).rev() {
        // cur holds J_k; produce J_{k-1}
        if k as u32 == n {
            wanted = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    // cur = J_0
    norm += cur;
    if n == 0 {
        wanted = cur;
    }
    wanted / norm
}

/// A tabulated positive zero `j_{n,k}` of `J_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselZero {
    pub order: u32,
    pub index: u32,
    pub zero: f64,
    /// Width of the final bisection bracket.
    pub tolerance: f64,
}

/// `k`-th positive zero of `J_n` (k starts at 1): unit-grid sign scan, then bisection.
pub fn bessel_zero(n: u32, k: u32) -> Result<f64> {
    Ok(bessel_zero_entry(n, k)?.zero)
}

pub fn bessel_zero_entry(n: u32, k: u32) -> Result<BesselZero> {
    if n > MAX_ORDER || k == 0 || k > MAX_ZERO_INDEX {
        return Err(Error::Oracle(format!("zero index (n={n}, k={k}) out of range")));
    }
    let mut found = 0;
    let mut a = 1.0;
    let mut fa = bessel_j(n, a)?;
    while a + 1.0 <= MAX_ARGUMENT {
        let b = a + 1.0;
        let fb = bessel_j(n, b)?;
        if fa == 0.0 || fa * fb < 0.0 {
            found += 1;
            if found == k {
                return bisect(n, k, a, b, fa);
            }
        }
        a = b;
        fa = fb;
    }
    Err(Error::Oracle(format!("no bracket for zero (n={n}, k={k}) below {MAX_ARGUMENT}")))
}

fn bisect(n: u32, k: u32, mut a: f64, mut b: f64, mut fa: f64) -> Result<BesselZero> {
    if fa == 0.0 {
        return Ok(BesselZero { order: n, index: k, zero: a, tolerance: 0.0 });
    }
    while b - a > 1e-13 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = bessel_j(n, mid)?;
        if fm == 0.0 {
            return Ok(BesselZero { order: n, index: k, zero: mid, tolerance: 0.0 });
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(BesselZero { order: n, index: k, zero: 0.5 * (a + b), tolerance: b - a })
}

/// First `count` positive zeros of `J_n`.
pub fn bessel_zero_table(n: u32, count: u32) -> Result<Vec<BesselZero>> {
    (1..=count).map(|k| bessel_zero_entry(n, k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscQuantity {
    Dirichlet1,
    Dirichlet2,
    Buckling1,
    Stokes1,
}

/// Exact eigenvalue of a disc of the given radius.
///
/// The second Dirichlet eigenvalue, the first clamped buckling eigenvalue and
/// the first Stokes eigenvalue all coincide with `(j_{1,1}/R)^2` on a disc.
pub fn disc_reference(radius: f64, which: DiscQuantity) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let j = match which {
        DiscQuantity::Dirichlet1 => bessel_zero(0, 1)?,
        DiscQuantity::Dirichlet2 | DiscQuantity::Buckling1 | DiscQuantity::Stokes1 => {
            bessel_zero(1, 1)?
        }
    };
    Ok((j / radius).powi(2))
}

/// The `k` smallest Dirichlet eigenvalues `pi^2 ((m/w)^2 + (n/h)^2)` of a `w x h` rectangle.
pub fn rectangle_dirichlet(width: f64, height: f64, k: usize) -> Result<Vec<f64>> {
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rectangle sides must be positive, got {width} x {height}"
        )));
    }
    let pi2 = std::f64::consts::PI.powi(2);
    let mut values = Vec::with_capacity(k * k);
    for m in 1..=k {
        for n in 1..=k {
            let (mf, nf) = (m as f64, n as f64);
            values.push(pi2 * ((mf / width).powi(2) + (nf / height).powi(2)));
        }
    }
    values.sort_by(f64::total_cmp);
    values.truncate(k);
    Ok(values)
}

/// Which boundary condition a disc spectrum is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscSpectrum {
    /// `-Laplace u = lambda u`, `u = 0`: values `j_{n,m}^2`.
    Dirichlet,
    /// Clamped buckling, equivalently Stokes: values `j_{n+1,m}^2`.
    Clamped,
}

/// The `k` smallest eigenvalues of a disc, listed with multiplicity
/// (angular orders `n >= 1` count twice).
pub fn disc_spectrum(radius: f64, which: DiscSpectrum, k: usize) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let shift = match which {
        DiscSpectrum::Dirichlet => 0,
        DiscSpectrum::Clamped => 1,
    };
    let mut values = Vec::new();
    for n in 0..=(MAX_ORDER - shift) {
        for m in 1..=MAX_ZERO_INDEX {
            let j = bessel_zero(n + shift, m)?;
            let v = (j / radius).powi(2);
            values.push(v);
            if n > 0 {
                values.push(v);
            }
        }
    }
    values.sort_by(f64::total_cmp);
    // Orders above the table would enter above j_{MAX_ORDER,1}.
    let cap = (bessel_zero(MAX_ORDER, 1)? / radius).powi(2);
    values.retain(|&v| v < cap);
    if values.len() < k {
        return Err(Error::Oracle(format!("disc spectrum tabulated for {} values, {k} requested", values.len())));
    }
    values.truncate(k);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn series_and_recurrence_agree_near_switch() {
        // Both branches are valid in the overlap; compare them directly.
        for n in 0..=MAX_ORDER {
            for &x in &[6.0, 7.5, 8.0, 9.0, 11.0] {
                let a = series(n, x);
                let b = miller(n, x);
                assert!((a - b).abs() < 1e-12, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn recurrence_identity_holds_at_large_argument() {
        // J_{n-1}(x) + J_{n+1}(x) = (2n/x) J_n(x)
        for &x in &[20.0, 47.3, 99.9] {
            for n in 1..MAX_ORDER {
                let lhs = bessel_j(n - 1, x).unwrap() + bessel_j(n + 1, x).unwrap();
                let rhs = 2.0 * n as f64 / x * bessel_j(n, x).unwrap();
                assert!((lhs - rhs).abs() < 1e-13, "x={x} n={n}");
            }
        }
    }

    #[test]
    fn large_argument_matches_asymptotic_form() {
        // Hankel expansion with four terms is accurate far below 1e-12 at x = 100.
        let x: f64 = 100.0;
        for n in 0..=2u32 {
            let mu = 4.0 * (n * n) as f64;
            let w = x - (n as f64 / 2.0 + 0.25) * PI;
            let p = 1.0 - (mu - 1.0) * (mu - 9.0) / (2.0 * (8.0 * x).powi(2))
                + (mu - 1.0) * (mu - 9.0) * (mu - 25.0) * (mu - 49.0) / (24.0 * (8.0 * x).powi(4));
            let q = (mu - 1.0) / (8.0 * x)
                - (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (6.0 * (8.0 * x).powi(3))
                + (mu - 1.0) * (mu - 9.0) * (mu - 25.0) * (mu - 49.0) * (mu - 81.0)
                    / (120.0 * (8.0 * x).powi(5));
            let asym = (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin());
            let got = bessel_j(n, x).unwrap();
            assert!((got - asym).abs() < 1e-12, "n={n}: {got} vs {asym}");
        }
    }

    #[test]
    fn known_zeros() {
        let j01 = bessel_zero(0, 1).unwrap();
        let j11 = bessel_zero(1, 1).unwrap();
        let j02 = bessel_zero(0, 2).unwrap();
        assert!((j01 - 2.404825557695773).abs() < 1e-12);
        assert!((j11 - 3.831705970207512).abs() < 1e-12);
        assert!((j02 - 5.520078110286311).abs() < 1e-12);
        assert!(j01 < j11 && j11 < j02);
        assert!(bessel_j(0, 2.404825557695773).unwrap().abs() < 1e-10);
    }

    #[test]
    fn zero_table_is_increasing_and_accurate() {
        for n in 0..=MAX_ORDER {
            let table = bessel_zero_table(n, MAX_ZERO_INDEX).unwrap();
            for pair in table.windows(2) {
                assert!(pair[0].zero < pair[1].zero);
            }
            for z in &table {
                assert!(bessel_j(n, z.zero).unwrap().abs() < 1e-12, "{z:?}");
            }
        }
    }

    #[test]
    fn domain_violations() {
        assert!(bessel_j(6, 1.0).is_err());
        assert!(bessel_j(0, -1.0).is_err());
        assert!(bessel_j(0, 100.5).is_err());
        assert!(bessel_zero(0, 0).is_err());
        assert!(bessel_zero(0, 11).is_err());
    }

    #[test]
    fn disc_references() {
        let j11 = bessel_zero(1, 1).unwrap();
        let r = 1.0 / PI.sqrt();
        let b = disc_reference(r, DiscQuantity::Buckling1).unwrap();
        assert!((b - PI * j11 * j11).abs() < 1e-10);
        assert!((b - 46.12477).abs() < 1e-5);
        let d1 = disc_reference(1.0, DiscQuantity::Dirichlet1).unwrap();
        assert!((d1 - 5.7832).abs() < 1e-4);
        for q in [
            DiscQuantity::Dirichlet1,
            DiscQuantity::Dirichlet2,
            DiscQuantity::Buckling1,
            DiscQuantity::Stokes1,
        ] {
            let one = disc_reference(1.0, q).unwrap();
            let two = disc_reference(2.0, q).unwrap();
            assert!((two - one / 4.0).abs() < 1e-14);
        }
        assert!(disc_reference(0.0, DiscQuantity::Stokes1).is_err());
    }

    #[test]
    fn rectangles() {
        let pi2 = PI * PI;
        let sq = rectangle_dirichlet(1.0, 1.0, 4).unwrap();
        assert!((sq[0] - 2.0 * pi2).abs() < 1e-12);
        assert!((sq[0] - 19.7392).abs() < 1e-4);
        assert!((sq[1] - 5.0 * pi2).abs() < 1e-12);
        assert!((sq[2] - 5.0 * pi2).abs() < 1e-12);
        assert!((sq[3] - 8.0 * pi2).abs() < 1e-12);
        let r = rectangle_dirichlet(2.0, 1.0, 1).unwrap();
        assert!((r[0] - 1.25 * pi2).abs() < 1e-12);
    }

    #[test]
    fn disc_spectrum_multiplicities() {
        let d = disc_spectrum(1.0, DiscSpectrum::Dirichlet, 6).unwrap();
        let j01 = bessel_zero(0, 1).unwrap().powi(2);
        let j11 = bessel_zero(1, 1).unwrap().powi(2);
        let j21 = bessel_zero(2, 1).unwrap().powi(2);
        let j02 = bessel_zero(0, 2).unwrap().powi(2);
        assert_eq!(d, vec![j01, j11, j11, j21, j21, j02]);
        let c = disc_spectrum(2.0, DiscSpectrum::Clamped, 3).unwrap();
        assert_eq!(c[0], j11 / 4.0);
        assert_eq!(c[1], j21 / 4.0);
        assert_eq!(c[1], c[2]);
        assert!(disc_spectrum(1.0, DiscSpectrum::Dirichlet, 1000).is_err());
    }
}
