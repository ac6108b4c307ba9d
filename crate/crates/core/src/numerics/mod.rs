//! Dense linear algebra and Fourier primitives.

mod fourier;
mod matrix;
mod qr;

pub(crate) use fourier::ifft_real;
pub use fourier::{circconv, circcorr, circshift, fft, fft_real, ifft};
pub(crate) use matrix::cholesky_solve;
pub use matrix::{dot, norm2, norm_inf, rel_error, scale, sub, symmetric_eigenvalues, Matrix};
pub use qr::{lstsq, qr, QrFactors, RANK_TOL};
pub use rustfft::num_complex::Complex64;
