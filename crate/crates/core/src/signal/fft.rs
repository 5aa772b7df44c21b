//! Iterative radix-2 Cooley–Tukey FFT.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Precomputed plan for a power-of-two transform length.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    // twiddles[k] = exp(-2πik/len) for k < len/2
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<usize>,
}

impl Fft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid(format!("FFT length must be a power of two, got {len}")));
        }
        let twiddles = (0..len / 2)
            .map(|k| {
                let angle = -2.0 * std::f64::consts::PI * k as f64 / len as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        let bits = len.trailing_zeros();
        let bit_reverse =
            (0..len).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect();
        Ok(Self { len, twiddles, bit_reverse })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Forward transform in place: `X[k] = Σ x[t]·exp(−i2πkt/n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// Inverse transform in place, including the 1/n scaling.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.len, "buffer length must match the plan");
        let n = self.len;
        for i in 0..n {
            let j = self.bit_reverse[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }

    /// Transforms a real vector zero-padded to the plan length and returns
    /// the non-negative-frequency half, bins `0..=n/2`.
    pub fn real_forward(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() > self.len {
            return Err(Error::invalid(format!("input of length {} exceeds FFT length {}", x.len(), self.len)));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (slot, &v) in buf.iter_mut().zip(x) {
            slot.re = v;
        }
        self.forward(&mut buf);
        buf.truncate(self.len / 2 + 1);
        Ok(buf)
    }
}

/// One-shot real FFT of `x` zero-padded to `n`; returns bins `0..=n/2`.
pub fn fft_real(x: &[f64], n: usize) -> Result<Vec<Complex64>> {
    Fft::new(n)?.real_forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[f64], n: usize) -> Vec<Complex64> {
        (0..=n / 2)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                        Complex64::new(v * angle.cos(), v * angle.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn impulse_is_flat() {
        let bins = fft_real(&[1.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(bins.len(), 3);
        for b in bins {
            assert!((b - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_goes_to_dc() {
        let bins = fft_real(&[1.0; 4], 4).unwrap();
        assert!((bins[0].re - 4.0).abs() < 1e-15);
        assert!(bins[1].norm() < 1e-15);
        assert!(bins[2].norm() < 1e-15);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(fft_real(&[1.0; 3], 6), Err(Error::InvalidArgument(_))));
        assert!(fft_real(&[1.0; 5], 4).is_err());
    }

    #[test]
    fn matches_naive_dft_with_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = fft_real(&x, 256).unwrap();
        let slow = naive_dft(&x, 256);
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn inverse_round_trips() {
        let plan = Fft::new(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let orig: Vec<Complex64> = (0..64).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let mut buf = orig.clone();
        plan.forward(&mut buf);
        plan.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
