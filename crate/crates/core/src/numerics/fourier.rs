//! Discrete Fourier transform and circular shift/convolution.
//!
//! Normalization: the forward transform is unnormalized,
//! `X(k) = Σ_t x(t)·exp(−2πi·kt/m)`, and the inverse carries the `1/m`
//! factor. Any length is accepted.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::matrix::norm2;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let plan = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        plan.process(buf);
    });
}

pub fn fft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.is_empty() {
        return Err(Error::Empty);
    }
    let mut buf = v.to_vec();
    transform(&mut buf, false);
    Ok(buf)
}

pub fn fft_real(v: &[f64]) -> Result<Vec<Complex64>> {
    if v.is_empty() {
        return Err(Error::Empty);
    }
    let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    transform(&mut buf, false);
    Ok(buf)
}

pub fn ifft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.is_empty() {
        return Err(Error::Empty);
    }
    let mut buf = v.to_vec();
    transform(&mut buf, true);
    let inv = 1.0 / buf.len() as f64;
    for z in &mut buf {
        *z *= inv;
    }
    Ok(buf)
}

/// Inverse transform of a spectrum known to belong to a real signal.
///
/// Imaginary residue is dropped after checking that it is at roundoff
/// level relative to the real part (`scale` sets an absolute floor).
pub(crate) fn ifft_real(spectrum: &[Complex64], scale: f64) -> Result<Vec<f64>> {
    let z = ifft(spectrum)?;
    let re: Vec<f64> = z.iter().map(|c| c.re).collect();
    debug_assert!({
        let im = z.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
        im <= 1e-9 * norm2(&re) + 1e-12 * scale
    });
    Ok(re)
}

/// Circular downward shift: `out[j] = v[(j − s) mod m]`.
pub fn circshift(v: &[f64], s: isize) -> Vec<f64> {
    let m = v.len();
    if m == 0 {
        return Vec::new();
    }
    let s = s.rem_euclid(m as isize) as usize;
    let mut out = Vec::with_capacity(m);
    out.extend_from_slice(&v[m - s..]);
    out.extend_from_slice(&v[..m - s]);
    out
}

/// Circular convolution through the FFT.
pub fn circconv(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let fa = fft_real(a)?;
    let fb = fft_real(b)?;
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    ifft_real(&prod, norm2(a) * norm2(b))
}

/// Circular cross-correlation `out[j] = Σ_t a[t]·b[(t + j) mod m]`,
/// i.e. the inner products of `b` with every circular shift of `a`.
pub fn circcorr(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let fa = fft_real(a)?;
    let fb = fft_real(b)?;
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    ifft_real(&prod, norm2(a) * norm2(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, seeded};
    use std::f64::consts::PI;

    fn direct_dft(v: &[f64]) -> Vec<Complex64> {
        let m = v.len();
        (0..m)
            .map(|k| {
                v.iter()
                    .enumerate()
                    .map(|(t, &x)| {
                        let ang = -2.0 * PI * (k * t % m) as f64 / m as f64;
                        Complex64::new(x * ang.cos(), x * ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn direct_conv(a: &[f64], b: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m)
            .map(|j| (0..m).map(|t| a[t] * b[(j + m - t) % m]).sum())
            .collect()
    }

    #[test]
    fn zero_and_impulse_spectra() {
        assert!(fft_real(&[0.0; 8]).unwrap().iter().all(|z| z.norm() == 0.0));
        let mut d = vec![0.0; 8];
        d[0] = 1.0;
        for z in fft_real(&d).unwrap() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        assert!(matches!(fft_real(&[]), Err(Error::Empty)));
    }

    #[test]
    fn matches_direct_dft() {
        let v = normal_vec(&mut seeded(3), 16);
        let fast = fft_real(&v).unwrap();
        let slow = direct_dft(&v);
        let scale = slow.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn round_trip_and_parseval_odd_length() {
        let v = normal_vec(&mut seeded(4), 15);
        let spec = fft_real(&v).unwrap();
        let back = ifft_real(&spec, 1.0).unwrap();
        assert!(crate::numerics::rel_error(&back, &v) < 1e-12);
        let e_time = norm2(&v).powi(2);
        let e_freq = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / 15.0;
        assert!((e_time - e_freq).abs() <= 1e-10 * e_time);
    }

    #[test]
    fn shift_examples() {
        assert_eq!(
            circshift(&[1.0, 2.0, 3.0, 4.0], 1),
            vec![4.0, 1.0, 2.0, 3.0]
        );
        let v = [1.0, 2.0, 3.0];
        assert_eq!(circshift(&v, 0), v.to_vec());
        assert_eq!(circshift(&v, 3), v.to_vec());
        assert_eq!(circshift(&v, -1), vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn conv_identity_and_delay() {
        let v = normal_vec(&mut seeded(5), 12);
        let mut d0 = vec![0.0; 12];
        d0[0] = 1.0;
        let mut d1 = vec![0.0; 12];
        d1[1] = 1.0;
        assert!(crate::numerics::rel_error(&circconv(&v, &d0).unwrap(), &v) < 1e-14);
        assert!(crate::numerics::rel_error(&circconv(&v, &d1).unwrap(), &circshift(&v, 1)) < 1e-14);
        assert!(circconv(&v, &d0[..11]).is_err());
    }

    #[test]
    fn conv_matches_double_sum() {
        let mut rng = seeded(6);
        let a = normal_vec(&mut rng, 12);
        let b = normal_vec(&mut rng, 12);
        let fast = circconv(&a, &b).unwrap();
        assert!(crate::numerics::rel_error(&fast, &direct_conv(&a, &b)) < 1e-10);
        let swapped = circconv(&b, &a).unwrap();
        assert!(crate::numerics::rel_error(&swapped, &fast) < 1e-12);
    }

    #[test]
    fn corr_is_inner_product_with_shifts() {
        let mut rng = seeded(7);
        let a = normal_vec(&mut rng, 10);
        let b = normal_vec(&mut rng, 10);
        let c = circcorr(&a, &b).unwrap();
        for (j, cj) in c.iter().enumerate() {
            let want = crate::numerics::dot(&circshift(&a, j as isize), &b);
            assert!((cj - want).abs() < 1e-12);
        }
    }
}
