//! Kernels for real symmetric tridiagonal matrices: Sturm counts, bisection
//! and a pivoted LU solve used by inverse iteration.

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off.len() == diag.len() - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(
            off.len() + 1,
            diag.len().max(1),
            "off-diagonal length mismatch"
        );
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (negative LDLᵀ pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let guard = f64::EPSILON * self.scale().max(f64::MIN_POSITIVE);
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i > 0 {
                self.off[i - 1] * self.off[i - 1]
            } else {
                0.0
            };
            q = self.diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = guard;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn scale(&self) -> f64 {
        self.diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection to `tol`
    /// (`tol = 0` bisects to adjacent floating-point numbers).
    pub fn kth_eigenvalue(&self, k: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        hi += f64::EPSILON * hi.abs().max(1.0);
        loop {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= tol || mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Solve `(T - shift) x = rhs` by LU with partial pivoting; exact zero
    /// pivots are replaced by `eps · ‖T‖` as in standard inverse iteration.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let factor = ShiftedLu::factor(&diag, &self.off, self.scale());
        factor.solve(rhs)
    }
}

/// LU factorization of a tridiagonal matrix with row interchanges (the
/// `gttrf` layout: `u0` diagonal, `u1`/`u2` first and second superdiagonal).
pub(crate) struct ShiftedLu {
    l: Vec<f64>,
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    pub(crate) fn factor(diag: &[f64], off: &[f64], scale: f64) -> Self {
        let n = diag.len();
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut u0 = diag.to_vec();
        let mut u1: Vec<f64> = off.to_vec();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let mut sub: Vec<f64> = off.to_vec();
        for i in 0..n.saturating_sub(1) {
            if u0[i].abs() >= sub[i].abs() {
                if u0[i] == 0.0 {
                    u0[i] = tiny;
                }
                let m = sub[i] / u0[i];
                l[i] = m;
                u0[i + 1] -= m * u1[i];
            } else {
                // swap rows i and i+1
                let m = u0[i] / sub[i];
                l[i] = m;
                swapped[i] = true;
                u0[i] = sub[i];
                let tmp = u1[i];
                u1[i] = u0[i + 1];
                u0[i + 1] = tmp - m * u0[i + 1];
                if i + 1 < n - 1 {
                    u2[i] = u1[i + 1];
                    u1[i + 1] *= -m;
                }
            }
            sub[i] = 0.0;
        }
        if n > 0 && u0[n - 1] == 0.0 {
            u0[n - 1] = tiny;
        }
        Self {
            l,
            u0,
            u1,
            u2,
            swapped,
        }
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.u0.len();
        let mut x = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
                x[i + 1] -= self.l[i] * x[i];
            } else {
                x[i + 1] -= self.l[i] * x[i];
            }
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.u2[i] * x[i + 2];
            }
            x[i] = v / self.u0[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn counts_match_known_spectrum() {
        let n = 50;
        let t = laplacian(n);
        let exact: Vec<f64> = (1..=n)
            .map(|k| {
                let s = (k as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin();
                4.0 * s * s
            })
            .collect();
        for (k, &lam) in exact.iter().enumerate() {
            assert_eq!(t.count_below(lam - 1e-9), k);
            assert_eq!(t.count_below(lam + 1e-9), k + 1);
            assert!((t.kth_eigenvalue(k, 0.0) - lam).abs() < 1e-13);
        }
        assert_eq!(t.count_below(t.gershgorin().0 - 1.0), 0);
    }

    #[test]
    fn pivoted_solve_recovers_rhs() {
        let t = SymTridiagonal::new(
            vec![0.1, -3.0, 2.0, 0.0, 5.0, 1.0],
            vec![4.0, 1.5, -2.0, 3.0, 0.5],
        );
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.0, 2.0];
        let shift = 0.7;
        let n = t.len();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = (t.diag[i] - shift) * x_true[i];
            if i > 0 {
                b[i] += t.off[i - 1] * x_true[i - 1];
            }
            if i + 1 < n {
                b[i] += t.off[i] * x_true[i + 1];
            }
        }
        let x = t.solve_shifted(shift, &b);
        for (a, e) in x.iter().zip(x_true) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }
}
