use num_complex::Complex64;
use std::ops::Mul;

/// Complex 2×2 matrix, `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex2x2(pub [[Complex64; 2]; 2]);

impl Complex2x2 {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self::new(a, zero, zero, d)
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.0[r][c]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Inverse via the adjugate; `None` for a singular matrix.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm() == 0.0 {
            return None;
        }
        let [[a, b], [c, d]] = self.0;
        Some(Self::new(d / det, -b / det, -c / det, a / det))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }
}

pub fn mat2_mul(a: &Complex2x2, b: &Complex2x2) -> Complex2x2 {
    let (a, b) = (&a.0, &b.0);
    Complex2x2([
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ])
}

impl Mul for Complex2x2 {
    type Output = Complex2x2;

    fn mul(self, rhs: Complex2x2) -> Complex2x2 {
        mat2_mul(&self, &rhs)
    }
}
