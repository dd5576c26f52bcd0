//! Spherical Bessel/Hankel functions, orthonormal spherical harmonics, and
//! Gauss-Legendre rules.
//!
//! Bessel values are produced by recurrence: downward (Miller) for `j_n`,
//! which is the decaying solution, and upward for `y_n`, which is the growing
//! one. Both directions are numerically stable for their respective
//! solutions; see <https://dlmf.nist.gov/10.51> for the recurrences.
//!
//! Harmonics are fully normalized over the unit sphere and carry the
//! Condon-Shortley phase. Directions use the elevation convention: `theta` is
//! measured from the equator, in `[-pi/2, pi/2]`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported recurrence order. Accuracy is tuned for arguments in
/// roughly [1e-3, 1e4]; outside that band values still evaluate but the
/// 1e-10 relative promise no longer holds (and y_n may saturate to +-inf).
pub const MAX_ORDER: usize = 200;

fn check_domain(n: usize, x: f64) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "order {n} exceeds supported maximum {MAX_ORDER}"
        )));
    }
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "argument must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// j_1 free of the subtractive cancellation that ruins the closed form below
/// x ~ 0.1: ascending series there, closed form elsewhere.
fn j1_stable(x: f64) -> f64 {
    if x >= 0.5 {
        return x.sin() / (x * x) - x.cos() / x;
    }
    let mut term = x / 3.0;
    let mut sum = term;
    for m in 1..30 {
        let mf = m as f64;
        term *= -(x * x / 2.0) / (mf * (2.0 * mf + 3.0));
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum
}

/// log10 envelope of the cylindrical Bessel magnitude, used to pick the
/// starting order of the downward recurrence.
fn envelope(n: f64, x: f64) -> f64 {
    0.5 * (6.28 * n).log10() - n * (1.36 * x / n).log10()
}

/// Smallest order at which the Bessel envelope has decayed `digits` decimal
/// digits below unity (secant iteration on the envelope).
fn decay_order(x: f64, digits: f64) -> usize {
    let mut n0 = (1.1 * x) as f64 + 1.0;
    let mut f0 = envelope(n0, x) - digits;
    let mut n1 = n0 + 5.0;
    let mut f1 = envelope(n1, x) - digits;
    let mut nn = n1;
    for _ in 0..20 {
        nn = n1 - (n1 - n0) / (1.0 - f0 / f1);
        let f = envelope(nn, x) - digits;
        if (nn - n1).abs() < 1.0 {
            break;
        }
        n0 = n1;
        f0 = f1;
        n1 = nn;
        f1 = f;
    }
    nn as usize
}

/// Starting order for the Miller recurrence that yields `digits` significant
/// digits at target order `n`.
fn miller_start(x: f64, n: usize, digits: f64) -> usize {
    let half = 0.5 * digits;
    let ejn = envelope(n as f64, x);
    let (obj, mut n0) = if ejn <= half {
        (digits, (1.1 * x) as f64 + 1.0)
    } else {
        (half + ejn, n as f64)
    };
    let mut f0 = envelope(n0, x) - obj;
    let mut n1 = n0 + 5.0;
    let mut f1 = envelope(n1, x) - obj;
    let mut nn = n1;
    for _ in 0..20 {
        nn = n1 - (n1 - n0) / (1.0 - f0 / f1);
        let f = envelope(nn, x) - obj;
        if (nn - n1).abs() < 1.0 {
            break;
        }
        n0 = n1;
        f0 = f1;
        n1 = nn;
        f1 = f;
    }
    nn as usize + 10
}

/// Spherical Bessel functions of the first kind, `j_0(x) ..= j_n(x)`.
///
/// Downward (Miller) recurrence normalized against the closed forms of `j_0`
/// and `j_1`; orders whose magnitude underflows f64 come back as zero.
pub fn sph_bessel_j_all(n: usize, x: f64) -> Result<Vec<f64>> {
    check_domain(n, x)?;
    let j0 = x.sin() / x;
    let j1 = j1_stable(x);
    let mut out = vec![0.0; n + 1];
    out[0] = j0;
    if n == 0 {
        return Ok(out);
    }
    out[1] = j1;
    if n == 1 {
        return Ok(out);
    }

    // Orders beyond the decay horizon underflow; the recurrence starts there.
    let horizon = decay_order(x, 200.0);
    let top = if n < horizon {
        miller_start(x, n, 15.0)
    } else {
        horizon
    };
    let mut f2 = 0.0f64;
    let mut f1 = 1e-160f64;
    let mut f = 0.0;
    for k in (0..=top).rev() {
        f = (2.0 * k as f64 + 3.0) / x * f1 - f2;
        if k <= n {
            out[k] = f;
        }
        if f.abs() > 1e250 {
            // Rescale to dodge overflow; normalization cancels the factor.
            f *= 1e-250;
            f1 *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
        f2 = f1;
        f1 = f;
    }
    let scale = if j0.abs() > j1.abs() { j0 / f } else { j1 / f2 };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out[0] = j0;
    if n >= 1 {
        out[1] = j1;
    }
    Ok(out)
}

/// Spherical Bessel functions of the second kind, `y_0(x) ..= y_n(x)`.
///
/// Upward recurrence from the closed forms of `y_0`, `y_1`. For large order
/// and small argument the values exceed the f64 range and saturate to -inf.
pub fn sph_bessel_y_all(n: usize, x: f64) -> Result<Vec<f64>> {
    check_domain(n, x)?;
    let mut out = vec![0.0; n + 1];
    out[0] = -x.cos() / x;
    if n == 0 {
        return Ok(out);
    }
    out[1] = -x.cos() / (x * x) - x.sin() / x;
    for k in 1..n {
        out[k + 1] = (2.0 * k as f64 + 1.0) / x * out[k] - out[k - 1];
    }
    Ok(out)
}

pub fn sph_bessel_j(n: usize, x: f64) -> Result<f64> {
    Ok(sph_bessel_j_all(n, x)?[n])
}

pub fn sph_bessel_y(n: usize, x: f64) -> Result<f64> {
    Ok(sph_bessel_y_all(n, x)?[n])
}

/// Derivative table from the values table via `f'_n = f_{n-1} - (n+1)/x f_n`
/// (and `f'_0 = -f_1`), valid for every spherical Bessel solution.
fn deriv_table(values: &[f64], x: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let mut out = vec![0.0; n + 1];
    out[0] = if n >= 1 {
        -values[1]
    } else {
        // j'_0 needs j_1 even when only order 0 was requested.
        f64::NAN
    };
    for k in 1..=n {
        out[k] = values[k - 1] - (k as f64 + 1.0) / x * values[k];
    }
    out
}

pub fn sph_bessel_j_deriv_all(n: usize, x: f64) -> Result<Vec<f64>> {
    let j = sph_bessel_j_all(n.max(1), x)?;
    let mut d = deriv_table(&j, x);
    d.truncate(n + 1);
    Ok(d)
}

pub fn sph_bessel_j_deriv(n: usize, x: f64) -> Result<f64> {
    Ok(sph_bessel_j_deriv_all(n, x)?[n])
}

/// Outgoing spherical Hankel functions `h^{(1)}_0(x) ..= h^{(1)}_n(x)`.
pub fn sph_hankel1_all(n: usize, x: f64) -> Result<Vec<Complex64>> {
    let j = sph_bessel_j_all(n, x)?;
    let y = sph_bessel_y_all(n, x)?;
    Ok(j
        .iter()
        .zip(&y)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect())
}

pub fn sph_hankel1(n: usize, x: f64) -> Result<Complex64> {
    Ok(sph_hankel1_all(n, x)?[n])
}

/// Values and derivatives of `h^{(1)}` in one pass.
pub fn sph_hankel1_with_deriv_all(n: usize, x: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let m = n.max(1);
    let j = sph_bessel_j_all(m, x)?;
    let y = sph_bessel_y_all(m, x)?;
    let jd = deriv_table(&j, x);
    let yd = deriv_table(&y, x);
    let mut h = Vec::with_capacity(n + 1);
    let mut hd = Vec::with_capacity(n + 1);
    for k in 0..=n {
        h.push(Complex64::new(j[k], y[k]));
        hd.push(Complex64::new(jd[k], yd[k]));
    }
    Ok((h, hd))
}

pub fn sph_hankel1_deriv(n: usize, x: f64) -> Result<Complex64> {
    Ok(sph_hankel1_with_deriv_all(n, x)?.1[n])
}

/// Degree/order pair `(l, p)` with `|p| <= l`, flattened as `l^2 + l + p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    l: u32,
    p: i32,
}

impl HarmonicIndex {
    pub fn new(l: u32, p: i32) -> Result<Self> {
        if p.unsigned_abs() > l {
            return Err(Error::InvalidArgument(format!(
                "harmonic order |{p}| exceeds degree {l}"
            )));
        }
        Ok(HarmonicIndex { l, p })
    }

    pub fn l(self) -> u32 {
        self.l
    }

    pub fn p(self) -> i32 {
        self.p
    }

    /// Position in the flat coefficient layout, `l^2 + l + p`.
    pub fn flat(self) -> usize {
        (self.l as usize) * (self.l as usize) + (self.l as i64 + self.p as i64) as usize
    }

    pub fn from_flat(idx: usize) -> Self {
        let l = (idx as f64).sqrt() as u32;
        // Integer sqrt truncation can land one off at perfect squares.
        let l = if ((l + 1) as usize) * ((l + 1) as usize) <= idx {
            l + 1
        } else {
            l
        };
        let p = idx as i64 - (l as i64) * (l as i64) - l as i64;
        HarmonicIndex { l, p: p as i32 }
    }

    /// Number of harmonics with degree at most `l_max`.
    pub fn count(l_max: u32) -> usize {
        ((l_max + 1) * (l_max + 1)) as usize
    }
}

/// Direction on the unit sphere. `theta` is elevation in `[-pi/2, pi/2]`,
/// `phi` azimuth; the unit vector is
/// `(cos(theta)cos(phi), cos(theta)sin(phi), sin(theta))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalDirection {
    theta: f64,
    phi: f64,
}

impl SphericalDirection {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || theta.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidArgument(format!(
                "elevation {theta} outside [-pi/2, pi/2]"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidArgument("azimuth must be finite".into()));
        }
        Ok(SphericalDirection { theta, phi })
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn phi(self) -> f64 {
        self.phi
    }

    pub fn unit_vector(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [ct * cp, ct * sp, st]
    }

    /// Direction of an arbitrary nonzero vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument(
                "cannot take the direction of a zero or non-finite vector".into(),
            ));
        }
        let theta = (v[2] / norm).clamp(-1.0, 1.0).asin();
        let phi = v[1].atan2(v[0]);
        let phi = if phi < 0.0 {
            phi + 2.0 * std::f64::consts::PI
        } else {
            phi
        };
        Ok(SphericalDirection { theta, phi })
    }
}

/// Normalized associated Legendre table `Q_l^m` for `m >= 0`, including the
/// Condon-Shortley phase and the full `Y` normalization, so that
/// `Y_l^m = Q_l^m e^{i m phi}`. Indexed by `l*(l+1)/2 + m`.
fn legendre_normalized(l_max: u32, sin_theta: f64, cos_theta: f64) -> Vec<f64> {
    // Arguments are sin/cos of the POLAR angle: sin_theta >= 0.
    let lm = l_max as usize;
    let mut q = vec![0.0; (lm + 1) * (lm + 2) / 2];
    let at = |l: usize, m: usize| l * (l + 1) / 2 + m;
    q[0] = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
    for m in 1..=lm {
        // Q_m^m = -sqrt((2m+1)/(2m)) sin(theta) Q_{m-1}^{m-1}
        q[at(m, m)] =
            -((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt() * sin_theta * q[at(m - 1, m - 1)];
    }
    for m in 0..lm {
        // Q_{m+1}^m = sqrt(2m+3) cos(theta) Q_m^m
        q[at(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * cos_theta * q[at(m, m)];
    }
    for m in 0..=lm {
        for l in (m + 2)..=lm {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            q[at(l, m)] = a * (cos_theta * q[at(l - 1, m)] - b * q[at(l - 2, m)]);
        }
    }
    q
}

/// All spherical harmonics of degree `<= l_max` at one direction, in flat
/// `l^2 + l + p` order.
pub fn sph_harmonics_upto(l_max: u32, dir: SphericalDirection) -> Vec<Complex64> {
    // Elevation theta: polar angle has cos = sin(theta), sin = cos(theta) >= 0.
    let cos_polar = dir.theta.sin();
    let sin_polar = dir.theta.cos();
    let q = legendre_normalized(l_max, sin_polar, cos_polar);
    let at = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let lm = l_max as usize;
    let mut phase = Vec::with_capacity(lm + 1);
    for p in 0..=lm {
        let (s, c) = (p as f64 * dir.phi).sin_cos();
        phase.push(Complex64::new(c, s));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); HarmonicIndex::count(l_max)];
    for l in 0..=lm {
        for p in 0..=l {
            let v = q[at(l, p)] * phase[p];
            out[l * l + l + p] = v;
            if p > 0 {
                // Y_l^{-p} = (-1)^p conj(Y_l^p)
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                out[l * l + l - p] = sign * v.conj();
            }
        }
    }
    out
}

/// Single orthonormal spherical harmonic `Y_l^p`.
pub fn sph_harmonic(idx: HarmonicIndex, dir: SphericalDirection) -> Complex64 {
    sph_harmonics_upto(idx.l, dir)[idx.flat()]
}

fn legendre_poly_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes (ascending in `[-1, 1]`) and weights.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_poly_and_deriv(n, x);
            dp = d;
            let dx = -p / d;
            x += dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // Newton guesses start near +1 and walk down; store ascending.
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
