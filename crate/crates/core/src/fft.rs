//! Radix-2 FFT engine with a packed real-input path.
//!
//! Forward transforms use `exp(-2πi·jt/k)`; the `1/k` normalization lives
//! entirely in the inverse. A size-`k` plan also drives the size-`k/2`
//! complex transform used inside [`FftPlan::rfft`], so a single twiddle table
//! serves both the complex and the real path.

use std::ops::AddAssign;

use num_complex::Complex;

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Largest supported transform length.
pub const MAX_FFT_SIZE: usize = 1 << 20;

/// Arithmetic tally for one call context.
///
/// Multiplications by powers of two (the `1/2` and `1/k` scalings of the
/// inverse and real-input paths) are exponent adjustments and are not counted.
/// Every butterfly is charged one full complex multiplication, trivial
/// twiddles included, which matches a datapath where each butterfly unit owns
/// a multiplier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub real_mults: u64,
    pub real_adds: u64,
    pub butterflies: u64,
    pub forward_transforms: u64,
    pub inverse_transforms: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Multiply-adds of a complex product `a * b` accumulated into `acc`.
    #[inline]
    pub(crate) fn complex_mul_acc(&mut self, n: u64) {
        self.real_mults += 4 * n;
        self.real_adds += 4 * n;
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.real_mults += rhs.real_mults;
        self.real_adds += rhs.real_adds;
        self.butterflies += rhs.butterflies;
        self.forward_transforms += rhs.forward_transforms;
        self.inverse_transforms += rhs.inverse_transforms;
    }
}

/// Precomputed twiddles and bit-reversal permutation for one power-of-two size.
///
/// Immutable once built; share freely across threads.
#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    size: usize,
    log2: u32,
    twiddles: Vec<Complex<T>>,
    bit_reversal: Vec<usize>,
}

/// Builds a plan for length `k`.
pub fn plan<T: Scalar>(k: usize) -> Result<FftPlan<T>> {
    FftPlan::new(k)
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || !k.is_power_of_two() || k > MAX_FFT_SIZE {
            return Err(Error::InvalidSize(k));
        }
        let log2 = k.trailing_zeros();
        let twiddles = (0..k / 2)
            .map(|i| {
                let angle = -2.0 * std::f64::consts::PI * i as f64 / k as f64;
                Complex::new(T::of(angle.cos()), T::of(angle.sin()))
            })
            .collect();
        let bit_reversal = (0..k)
            .map(|i| if log2 == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - log2) })
            .collect();
        Ok(Self { size: k, log2, twiddles, bit_reversal })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `W_k^i = exp(-2πi·i/k)` for `i` in `0..k/2`.
    pub fn twiddles(&self) -> &[Complex<T>] {
        &self.twiddles
    }

    pub fn bit_reversal(&self) -> &[usize] {
        &self.bit_reversal
    }

    pub fn fft(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.fft_counted(x, &mut OpCounter::new())
    }

    pub fn fft_counted(&self, x: &[Complex<T>], ops: &mut OpCounter) -> Result<Vec<Complex<T>>> {
        check_len(self.size, x.len())?;
        let mut buf = x.to_vec();
        self.transform(&mut buf, 0, ops);
        ops.forward_transforms += 1;
        Ok(buf)
    }

    pub fn ifft(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.ifft_counted(x, &mut OpCounter::new())
    }

    /// Inverse by conjugating, running the forward butterflies, conjugating
    /// back and scaling by `1/k`.
    pub fn ifft_counted(&self, x: &[Complex<T>], ops: &mut OpCounter) -> Result<Vec<Complex<T>>> {
        check_len(self.size, x.len())?;
        let mut buf: Vec<Complex<T>> = x.iter().map(|c| c.conj()).collect();
        self.transform(&mut buf, 0, ops);
        let scale = T::one() / T::of(self.size as f64);
        for c in buf.iter_mut() {
            *c = c.conj() * scale;
        }
        ops.inverse_transforms += 1;
        Ok(buf)
    }

    pub fn rfft(&self, x: &[T]) -> Result<Spectrum<T>> {
        self.rfft_counted(x, &mut OpCounter::new())
    }

    /// Real-input transform via one complex transform of half the length.
    ///
    /// Even samples go to the real part and odd samples to the imaginary part;
    /// the half spectrum is then untangled pairwise so that bins `j` and
    /// `k/2 - j` share one twiddle multiplication.
    pub fn rfft_counted(&self, x: &[T], ops: &mut OpCounter) -> Result<Spectrum<T>> {
        check_len(self.size, x.len())?;
        if self.size < 2 {
            return Err(Error::InvalidSize(self.size));
        }
        let half = self.size / 2;
        let mut z: Vec<Complex<T>> =
            x.chunks_exact(2).map(|pair| Complex::new(pair[0], pair[1])).collect();
        self.transform(&mut z, 1, ops);

        let two = T::of(2.0);
        let mut out = vec![Complex::new(T::zero(), T::zero()); half + 1];
        out[0] = Complex::new(z[0].re + z[0].im, T::zero());
        out[half] = Complex::new(z[0].re - z[0].im, T::zero());
        ops.real_adds += 2;
        ops.butterflies += 1;
        if half >= 2 {
            out[half / 2] = z[half / 2].conj();
        }
        for j in 1..half.div_ceil(2) {
            let a = z[j];
            let b = z[half - j].conj();
            let even = a + b;
            let diff = a - b;
            // diff / i
            let odd = Complex::new(diff.im, -diff.re);
            let t = self.twiddles[j] * odd;
            out[j] = (even + t) / two;
            out[half - j] = (even - t).conj() / two;
        }
        let pairs = half.div_ceil(2).saturating_sub(1) as u64;
        ops.real_mults += 4 * pairs;
        ops.real_adds += 10 * pairs;
        ops.butterflies += pairs;
        ops.forward_transforms += 1;
        Ok(Spectrum { full_size: self.size, coeffs: out })
    }

    pub fn irfft(&self, spec: &Spectrum<T>) -> Result<Vec<T>> {
        self.irfft_counted(spec, &mut OpCounter::new())
    }

    /// Inverse of [`FftPlan::rfft`]; the reconstruction is real by construction.
    pub fn irfft_counted(&self, spec: &Spectrum<T>, ops: &mut OpCounter) -> Result<Vec<T>> {
        check_len(self.size, spec.full_size)?;
        if self.size < 2 {
            return Err(Error::InvalidSize(self.size));
        }
        spec.validate()?;
        let half = self.size / 2;
        let x = &spec.coeffs;
        let mut z = vec![Complex::new(T::zero(), T::zero()); half];
        // Unscaled here; the 1/2 and the inverse's 1/(k/2) fold into one 1/k.
        z[0] = Complex::new(x[0].re + x[half].re, x[0].re - x[half].re);
        ops.real_adds += 2;
        ops.butterflies += 1;
        if half >= 2 {
            z[half / 2] = x[half / 2].conj() * T::of(2.0);
        }
        for j in 1..half.div_ceil(2) {
            let a = x[j];
            let b = x[half - j].conj();
            let even = a + b;
            let odd = (a - b) * self.twiddles[j].conj();
            // i * odd
            let i_odd = Complex::new(-odd.im, odd.re);
            z[j] = even + i_odd;
            // conj(even) + i * conj(odd)
            z[half - j] = Complex::new(even.re + odd.im, odd.re - even.im);
        }
        let pairs = half.div_ceil(2).saturating_sub(1) as u64;
        ops.real_mults += 4 * pairs;
        ops.real_adds += 10 * pairs;
        ops.butterflies += pairs;

        for c in z.iter_mut() {
            *c = c.conj();
        }
        self.transform(&mut z, 1, ops);
        let scale = T::one() / T::of(self.size as f64);
        let mut out = Vec::with_capacity(self.size);
        for c in z {
            out.push(c.re * scale);
            out.push(-c.im * scale);
        }
        ops.inverse_transforms += 1;
        Ok(out)
    }

    /// In-place iterative decimation-in-time transform of length `size >> shift`.
    fn transform(&self, buf: &mut [Complex<T>], shift: u32, ops: &mut OpCounter) {
        let n = buf.len();
        debug_assert_eq!(n, self.size >> shift);
        if n < 2 {
            return;
        }
        for i in 0..n {
            let j = self.bit_reversal[i << shift];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = (n / (2 * half)) << shift;
            for block in buf.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = *b * self.twiddles[j * stride];
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
        }
        let count = (n / 2) as u64 * u64::from(n.trailing_zeros());
        ops.butterflies += count;
        ops.real_mults += 4 * count;
        ops.real_adds += 6 * count;
    }

    /// Level count `log2(k)`.
    pub fn levels(&self) -> u32 {
        self.log2
    }
}

/// Half spectrum of a real sequence: bins `0..=k/2`.
///
/// Bin `j > k/2` of the full spectrum is the conjugate of bin `k - j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    full_size: usize,
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrum<T> {
    /// Checks the coefficient count and that the DC and Nyquist bins are real.
    pub fn new(full_size: usize, coeffs: Vec<Complex<T>>) -> Result<Self> {
        let spec = Self { full_size, coeffs };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zeros(full_size: usize) -> Self {
        Self { full_size, coeffs: vec![Complex::new(T::zero(), T::zero()); full_size / 2 + 1] }
    }

    /// Length-1 transform is the identity.
    pub(crate) fn scalar(v: T) -> Self {
        Self { full_size: 1, coeffs: vec![Complex::new(v, T::zero())] }
    }

    pub fn full_size(&self) -> usize {
        self.full_size
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    fn validate(&self) -> Result<()> {
        let expected = self.full_size / 2 + 1;
        if self.full_size == 0 || self.coeffs.len() != expected {
            return Err(Error::InvalidSpectrum(format!(
                "{} coefficients for a length-{} signal (expected {expected})",
                self.coeffs.len(),
                self.full_size
            )));
        }
        let tol = T::spectrum_tolerance();
        let dc = self.coeffs[0].im;
        let nyquist = self.coeffs[expected - 1].im;
        if dc.abs() > tol || nyquist.abs() > tol {
            return Err(Error::InvalidSpectrum(format!(
                "DC/Nyquist bins must be real (imaginary parts {dc}, {nyquist})"
            )));
        }
        Ok(())
    }

    /// Spectrum of the circular reversal `v'[t] = v[-t mod k]`.
    pub fn conj(&self) -> Self {
        Self { full_size: self.full_size, coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    /// All `k` bins, reconstructed by conjugate symmetry.
    pub fn to_full(&self) -> Vec<Complex<T>> {
        let k = self.full_size;
        (0..k).map(|j| if j <= k / 2 { self.coeffs[j] } else { self.coeffs[k - j].conj() }).collect()
    }

    /// `self += a ∘ b`, bin by bin.
    pub(crate) fn mul_acc(&mut self, a: &Spectrum<T>, b: &Spectrum<T>, ops: &mut OpCounter) {
        debug_assert_eq!(a.full_size, self.full_size);
        debug_assert_eq!(b.full_size, self.full_size);
        let last = self.coeffs.len() - 1;
        // DC and Nyquist are real: one real multiply-add each.
        self.coeffs[0].re += a.coeffs[0].re * b.coeffs[0].re;
        let mut real_bins = 1;
        if last > 0 {
            self.coeffs[last].re += a.coeffs[last].re * b.coeffs[last].re;
            real_bins += 1;
        }
        for j in 1..last {
            self.coeffs[j] += a.coeffs[j] * b.coeffs[j];
        }
        ops.real_mults += real_bins;
        ops.real_adds += real_bins;
        ops.complex_mul_acc(last.saturating_sub(1) as u64);
    }
}

/// Elementwise product of two half spectra.
pub fn spectrum_mul<T: Scalar>(a: &Spectrum<T>, b: &Spectrum<T>) -> Result<Spectrum<T>> {
    spectrum_mul_counted(a, b, &mut OpCounter::new())
}

pub fn spectrum_mul_counted<T: Scalar>(
    a: &Spectrum<T>,
    b: &Spectrum<T>,
    ops: &mut OpCounter,
) -> Result<Spectrum<T>> {
    check_len(a.full_size, b.full_size)?;
    let mut out = Spectrum::zeros(a.full_size);
    out.mul_acc(a, b, ops);
    // mul_acc charged an add per product; a plain product has none.
    let bins = out.coeffs.len() as u64;
    let complex_bins = bins.saturating_sub(2);
    ops.real_adds -= (bins - complex_bins) + 2 * complex_bins;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    /// O(k²) DFT straight from the definition.
    fn naive_dft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let k = x.len();
        (0..k)
            .map(|j| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let angle = -2.0 * std::f64::consts::PI * ((j * t) % k) as f64 / k as f64;
                        v * c(angle.cos(), angle.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn max_err(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn random_complex(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex<f64>> {
        (0..k).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn plan_rejects_bad_sizes() {
        for k in [0, 3, 6, 12, 1 << 21] {
            assert!(matches!(plan::<f64>(k), Err(Error::InvalidSize(_))), "k={k}");
        }
    }

    #[test]
    fn plan_small_sizes() {
        let p1 = plan::<f64>(1).unwrap();
        assert!(p1.twiddles().is_empty());
        assert_eq!(p1.bit_reversal(), &[0]);

        let p4 = plan::<f64>(4).unwrap();
        let tw = p4.twiddles();
        assert_eq!(tw.len(), 2);
        assert_eq!(tw[0], c(1.0, 0.0));
        assert!((tw[1] - c(0.0, -1.0)).norm() < 1e-16);

        let p8 = plan::<f64>(8).unwrap();
        assert_eq!(p8.bit_reversal(), &[0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn bit_reversal_is_an_involution() {
        for log in 0..=12 {
            let p = plan::<f64>(1 << log).unwrap();
            let rev = p.bit_reversal();
            let mut seen = vec![false; rev.len()];
            for (i, &r) in rev.iter().enumerate() {
                assert_eq!(rev[r], i);
                seen[r] = true;
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn twiddles_match_direct_evaluation() {
        let p = plan::<f64>(1024).unwrap();
        for (i, w) in p.twiddles().iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * i as f64 / 1024.0;
            assert!((w.re - angle.cos()).abs() <= f64::EPSILON);
            assert!((w.im - angle.sin()).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn fft_examples() {
        let p = plan::<f64>(4).unwrap();
        let impulse = p.fft(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(max_err(&impulse, &[c(1.0, 0.0); 4]) < 1e-15);

        let cst = p.fft(&[c(2.5, 0.0); 4]).unwrap();
        assert!(max_err(&cst, &[c(10.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]) < 1e-15);

        let x = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)];
        let expected = [c(10.0, 0.0), c(-2.0, 2.0), c(-2.0, 0.0), c(-2.0, -2.0)];
        assert!(max_err(&naive_dft(&x), &expected) < 1e-12);
        assert!(max_err(&p.fft(&x).unwrap(), &expected) < 1e-12);
    }

    #[test]
    fn fft_matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for log in 0..=10 {
            let k = 1 << log;
            let p = plan::<f64>(k).unwrap();
            let x = random_complex(&mut rng, k);
            let err = max_err(&p.fft(&x).unwrap(), &naive_dft(&x));
            assert!(err <= 1e-10 * k as f64, "k={k} err={err}");
        }
    }

    #[test]
    fn size_mismatch_is_reported() {
        let p = plan::<f64>(8).unwrap();
        assert!(matches!(p.fft(&[c(0.0, 0.0); 4]), Err(Error::SizeMismatch { expected: 8, actual: 4 })));
        assert!(matches!(p.ifft(&[c(0.0, 0.0); 16]), Err(Error::SizeMismatch { .. })));
        assert!(matches!(p.rfft(&[0.0; 3]), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn ifft_examples_and_round_trip() {
        let p = plan::<f64>(4).unwrap();
        let back = p.ifft(&[c(12.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(max_err(&back, &[c(3.0, 0.0); 4]) < 1e-15);
        let back = p.ifft(&[c(1.0, 0.0); 4]).unwrap();
        assert!(max_err(&back, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let p16 = plan::<f64>(16).unwrap();
        let x = random_complex(&mut rng, 16);
        let round = p16.ifft(&p16.fft(&x).unwrap()).unwrap();
        assert!(max_err(&round, &x) <= 1e-10);
    }

    #[test]
    fn rfft_examples() {
        let p = plan::<f64>(4).unwrap();
        let s = p.rfft(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(max_err(s.coeffs(), &[c(1.0, 0.0); 3]) < 1e-15);
        let s = p.rfft(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(max_err(s.coeffs(), &[c(10.0, 0.0), c(-2.0, 2.0), c(-2.0, 0.0)]) < 1e-12);

        assert!(matches!(plan::<f64>(1).unwrap().rfft(&[1.0]), Err(Error::InvalidSize(1))));
    }

    #[test]
    fn rfft_truncates_full_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for log in 1..=10 {
            let k = 1 << log;
            let p = plan::<f64>(k).unwrap();
            let x: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let full = naive_dft(&x.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>());
            let s = p.rfft(&x).unwrap();
            assert_eq!(s.coeffs().len(), k / 2 + 1);
            assert_eq!(s.coeffs()[0].im, 0.0);
            assert_eq!(s.coeffs()[k / 2].im, 0.0);
            assert!(max_err(s.coeffs(), &full[..=k / 2]) <= 1e-10 * k as f64, "k={k}");
            assert!(max_err(&s.to_full(), &full) <= 1e-10 * k as f64);
        }
    }

    #[test]
    fn rfft_multiplies_fewer_than_complex_fft() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = plan::<f64>(8).unwrap();
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut real_ops = OpCounter::new();
        p.rfft_counted(&x, &mut real_ops).unwrap();
        let mut complex_ops = OpCounter::new();
        let promoted: Vec<_> = x.iter().map(|&v| c(v, 0.0)).collect();
        p.fft_counted(&promoted, &mut complex_ops).unwrap();
        assert!(10 * real_ops.real_mults <= 6 * complex_ops.real_mults);
    }

    #[test]
    fn irfft_examples() {
        let p = plan::<f64>(4).unwrap();
        let back = p.irfft(&p.rfft(&[5.0; 4]).unwrap()).unwrap();
        assert!(back.iter().all(|v| (v - 5.0).abs() < 1e-15));
        let back = p.irfft(&Spectrum::zeros(4)).unwrap();
        assert_eq!(back, vec![0.0; 4]);

        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let p32 = plan::<f64>(32).unwrap();
        let x: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = p32.irfft(&p32.rfft(&x).unwrap()).unwrap();
        let err = back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn irfft_rejects_complex_dc() {
        let bad = Spectrum { full_size: 4, coeffs: vec![c(1.0, 0.5), c(0.0, 0.0), c(0.0, 0.0)] };
        let p = plan::<f64>(4).unwrap();
        assert!(matches!(p.irfft(&bad), Err(Error::InvalidSpectrum(_))));
        assert!(Spectrum::new(4, vec![c(0.0, 0.0); 2]).is_err());
        assert!(Spectrum::new(4, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1e-3)]).is_err());
    }

    #[test]
    fn spectrum_mul_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = plan::<f64>(8).unwrap();
        let mut impulse = vec![0.0; 8];
        impulse[0] = 1.0;
        let one = p.rfft(&impulse).unwrap();
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = p.rfft(&x).unwrap();
        assert!(max_err(spectrum_mul(&one, &b).unwrap().coeffs(), b.coeffs()) < 1e-15);
        let zero = spectrum_mul(&Spectrum::zeros(8), &b).unwrap();
        assert!(zero.coeffs().iter().all(|v| v.norm() == 0.0));

        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = p.rfft(&y).unwrap();
        let full_a = naive_dft(&y.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>());
        let full_b = naive_dft(&x.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>());
        let product: Vec<_> = full_a.iter().zip(&full_b).map(|(u, v)| u * v).collect();
        let got = spectrum_mul(&a, &b).unwrap();
        assert!(max_err(got.coeffs(), &product[..=4]) < 1e-12);
        assert!(got.coeffs()[0].im == 0.0 && got.coeffs()[4].im == 0.0);

        assert!(matches!(spectrum_mul(&a, &Spectrum::zeros(4)), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn spectrum_mul_counts_plain_products() {
        let a = Spectrum::<f64>::zeros(16);
        let mut ops = OpCounter::new();
        spectrum_mul_counted(&a, &a, &mut ops).unwrap();
        assert_eq!(ops.real_mults, 2 + 4 * 7);
        assert_eq!(ops.real_adds, 2 * 7);
    }

    #[test]
    fn conj_spectrum_is_circular_reversal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = plan::<f64>(16).unwrap();
        let v: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rev: Vec<f64> = (0..16).map(|t| v[(16 - t) % 16]).collect();
        let err = max_err(p.rfft(&rev).unwrap().coeffs(), p.rfft(&v).unwrap().conj().coeffs());
        assert!(err < 1e-12);
    }

    #[test]
    fn single_precision_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = plan::<f32>(64).unwrap();
        let x: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = p.irfft(&p.rfft(&x).unwrap()).unwrap();
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-4));
    }
}
