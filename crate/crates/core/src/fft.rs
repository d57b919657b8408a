//! Minimal radix-2 complex FFT used for loop <-> coefficient conversions.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Smallest power of two >= n.
pub fn next_pow2(n: usize) -> usize {
    let mut m = 1;
    while m < n {
        m <<= 1;
    }
    m
}

fn transform(data: &mut [Complex64], sign: f64) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    // bit reversal permutation
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            data.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j & m != 0 {
            j ^= m;
            m >>= 1;
        }
        j |= m;
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let wl = Complex64::new(ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = data[start + k];
                let v = data[start + k + len / 2] * w;
                data[start + k] = u + v;
                data[start + k + len / 2] = u - v;
                w *= wl;
            }
        }
        len <<= 1;
    }
}

/// Forward transform: X_k = sum_j x_j e^{-2 pi i jk / n}. No normalization.
pub fn fft(data: &mut [Complex64]) {
    transform(data, -1.0);
}

/// Inverse kernel: x_j = sum_k X_k e^{+2 pi i jk / n}. No normalization.
pub fn ifft(data: &mut [Complex64]) {
    transform(data, 1.0);
}
