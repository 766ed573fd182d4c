use num_complex::Complex64;

use super::lu::lu_solve;
use super::matrix::RealMatrix;
use super::NumericsError;

/// Hard cap on the eigensolver dimension; reaction networks and ring
/// couplings in this crate stay far below it.
pub const EIG_DIM_CAP: usize = 16;

/// Every reported eigenvalue must beat this residual, or the solve is
/// rejected as not converged.
pub const EIG_RESIDUAL_CAP: f64 = 1e-8;

/// Iteration cap per deflated eigenvalue in the QR sweep.
const MAX_QR_ITERS_PER_EIGENVALUE: usize = 30;

/// Eigenvalues of a real matrix plus a quality metric.
///
/// Complex eigenvalues appear in exact conjugate pairs: each pair is emitted
/// once from a 2x2 deflation block with `±` imaginary parts, which is
/// stronger than the pairing-within-1e−9 contract callers rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Sorted by descending real part, then descending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// max over eigenvalues of ‖Av − λv‖₂/‖v‖₂ with v from inverse iteration.
    pub max_residual: f64,
}

/// Eigenvalues of a small dense real matrix.
///
/// Pipeline: Parlett–Reinsch balancing → elimination Hessenberg reduction →
/// Francis double-shift QR (eigenvalues only). Residuals are then measured
/// against the *original* matrix by inverse iteration, so balancing cannot
/// mask a bad value.
///
/// # Errors
/// - [`NumericsError::DimensionTooLarge`] above [`EIG_DIM_CAP`].
/// - [`NumericsError::NoConvergence`] if QR stalls or any residual exceeds
///   [`EIG_RESIDUAL_CAP`].
pub fn eig_real(m: &RealMatrix) -> Result<Spectrum, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n > EIG_DIM_CAP {
        return Err(NumericsError::DimensionTooLarge {
            dim: n,
            cap: EIG_DIM_CAP,
        });
    }

    let mut a: Vec<f64> = m.as_slice().to_vec();
    balance(&mut a, n);
    hessenberg(&mut a, n);
    let (mut eigenvalues, sweeps) = francis_qr(&mut a, n)?;
    eigenvalues.sort_unstable_by(|x, y| y.re.total_cmp(&x.re).then_with(|| y.im.total_cmp(&x.im)));

    let mut max_residual = 0.0_f64;
    for &lambda in &eigenvalues {
        max_residual = max_residual.max(eigen_residual(m, lambda));
    }
    if max_residual.is_nan() || max_residual > EIG_RESIDUAL_CAP {
        return Err(NumericsError::NoConvergence {
            iterations: sweeps,
            best_residual: max_residual,
        });
    }
    Ok(Spectrum {
        eigenvalues,
        max_residual,
    })
}

/// Parlett–Reinsch diagonal balancing: a similarity transform by powers of
/// the radix (exact in floating point) that roughly equalizes row and column
/// norms, improving QR accuracy when rate constants span decades.
fn balance(a: &mut [f64], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut col_norm = 0.0;
            let mut row_norm = 0.0;
            for j in 0..n {
                if j != i {
                    col_norm += a[j * n + i].abs();
                    row_norm += a[i * n + j].abs();
                }
            }
            if col_norm != 0.0 && row_norm != 0.0 {
                let mut g = row_norm / RADIX;
                let mut f = 1.0;
                let s = col_norm + row_norm;
                let mut c = col_norm;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = row_norm * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + row_norm) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        a[i * n + j] *= ginv;
                    }
                    for j in 0..n {
                        a[j * n + i] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Reduction to upper Hessenberg form by stabilized elementary similarity
/// transformations (pivoting on the largest subdiagonal entry per column).
fn hessenberg(a: &mut [f64], n: usize) {
    if n < 3 {
        return;
    }
    for m in 1..(n - 1) {
        let mut x = 0.0_f64;
        let mut pivot_row = m;
        for j in m..n {
            if a[j * n + m - 1].abs() > x.abs() {
                x = a[j * n + m - 1];
                pivot_row = j;
            }
        }
        if pivot_row != m {
            for j in (m - 1)..n {
                a.swap(pivot_row * n + j, m * n + j);
            }
            for j in 0..n {
                a.swap(j * n + pivot_row, j * n + m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i * n + m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i * n + m - 1] = 0.0;
                    for j in m..n {
                        a[i * n + j] -= y * a[m * n + j];
                    }
                    for j in 0..n {
                        a[j * n + m] += y * a[j * n + i];
                    }
                }
            }
        }
    }
    for r in 2..n {
        for c in 0..(r - 1) {
            a[r * n + c] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns the
/// eigenvalues (deflation order) and the number of sweeps performed.
fn francis_qr(a: &mut [f64], n: usize) -> Result<(Vec<Complex64>, usize), NumericsError> {
    let mut eigenvalues = Vec::with_capacity(n);
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i * n + j].abs();
        }
    }
    if anorm == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); n], 0));
    }

    let mut total_sweeps = 0usize;
    let mut t = 0.0;
    let mut hi: isize = n as isize - 1;
    while hi >= 0 {
        let mut its = 0usize;
        loop {
            let nn = hi as usize;
            // Look for a negligible subdiagonal entry to split the problem.
            let mut l = nn;
            while l >= 1 {
                let mut s = a[(l - 1) * n + l - 1].abs() + a[l * n + l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l * n + l - 1].abs() <= f64::EPSILON * s {
                    a[l * n + l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn * n + nn];
            if l == nn {
                eigenvalues.push(Complex64::new(x + t, 0.0));
                hi -= 1;
                break;
            }
            let mut y = a[(nn - 1) * n + nn - 1];
            let mut w = a[nn * n + nn - 1] * a[(nn - 1) * n + nn];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let xt = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    let first = xt + z;
                    let second = if z != 0.0 { xt - w / z } else { first };
                    eigenvalues.push(Complex64::new(first, 0.0));
                    eigenvalues.push(Complex64::new(second, 0.0));
                } else {
                    eigenvalues.push(Complex64::new(xt + p, z));
                    eigenvalues.push(Complex64::new(xt + p, -z));
                }
                hi -= 2;
                break;
            }
            if its == MAX_QR_ITERS_PER_EIGENVALUE {
                return Err(NumericsError::NoConvergence {
                    iterations: total_sweeps,
                    best_residual: a[nn * n + nn - 1].abs(),
                });
            }
            if its == 10 || its == 20 {
                // Exceptional shift to break symmetry-induced cycling.
                t += x;
                for i in 0..=nn {
                    a[i * n + i] -= x;
                }
                let s = a[nn * n + nn - 1].abs() + a[(nn - 1) * n + nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total_sweeps += 1;

            // Find two consecutive small subdiagonals working up from the bottom.
            let mut m = nn - 2;
            let (mut p, mut q, mut r): (f64, f64, f64);
            loop {
                let z = a[m * n + m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1) * n + m] + a[m * n + m + 1];
                q = a[(m + 1) * n + m + 1] - z - rr - ss;
                r = a[(m + 2) * n + m + 1];
                let scale = p.abs() + q.abs() + r.abs();
                p /= scale;
                q /= scale;
                r /= scale;
                if m == l {
                    break;
                }
                let u = a[m * n + m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a[(m - 1) * n + m - 1].abs() + z.abs() + a[(m + 1) * n + m + 1].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i * n + i - 2] = 0.0;
                if i != m + 2 {
                    a[i * n + i - 3] = 0.0;
                }
            }

            // Double QR sweep: chase the bulge from row m to row nn.
            for k in m..nn {
                if k != m {
                    p = a[k * n + k - 1];
                    q = a[(k + 1) * n + k - 1];
                    r = if k != nn - 1 {
                        a[(k + 2) * n + k - 1]
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[k * n + k - 1] = -a[k * n + k - 1];
                    }
                } else {
                    a[k * n + k - 1] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nn {
                    let mut pp = a[k * n + j] + q * a[(k + 1) * n + j];
                    if k != nn - 1 {
                        pp += r * a[(k + 2) * n + j];
                        a[(k + 2) * n + j] -= pp * z;
                    }
                    a[(k + 1) * n + j] -= pp * y;
                    a[k * n + j] -= pp * x;
                }
                let upper = if nn < k + 3 { nn } else { k + 3 };
                for i in l..=upper {
                    let mut pp = x * a[i * n + k] + y * a[i * n + k + 1];
                    if k != nn - 1 {
                        pp += z * a[i * n + k + 2];
                        a[i * n + k + 2] -= pp * r;
                    }
                    a[i * n + k + 1] -= pp * q;
                    a[i * n + k] -= pp;
                }
            }
        }
    }
    Ok((eigenvalues, total_sweeps))
}

/// ‖Av − λv‖₂/‖v‖₂ with v recovered by two steps of inverse iteration from a
/// fixed pseudo-random start (a deterministic LCG pattern, so symmetric
/// matrices cannot leave the start vector orthogonal to the eigenvector).
fn eigen_residual(a: &RealMatrix, lambda: Complex64) -> f64 {
    let n = a.rows();
    let mut v0 = Vec::with_capacity(n);
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    for _ in 0..n {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let unit = (state >> 11) as f64 / (1u64 << 53) as f64;
        v0.push(Complex64::new(2.0 * unit - 1.0, 0.0));
    }

    let mut delta = 1e-13 * (1.0 + lambda.norm());
    for _attempt in 0..4 {
        let shift = lambda + delta * Complex64::new(1.0, 0.37);
        let pencil = a.resolvent_pencil(shift);
        let step = |rhs: &[Complex64]| -> Option<Vec<Complex64>> {
            let mut v = lu_solve(&pencil, rhs).ok()?;
            let norm = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if !(norm > 0.0 && norm.is_finite()) {
                return None;
            }
            for z in &mut v {
                *z /= norm;
            }
            Some(v)
        };
        let v = step(&v0).and_then(|v1| step(&v1));
        if let Some(v) = v {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                let mut av = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    av += a.get(i, j) * v[j];
                }
                num += (av - lambda * v[i]).norm_sqr();
                den += v[i].norm_sqr();
            }
            if den > 0.0 {
                return (num / den).sqrt();
            }
        }
        delta *= 1e3;
    }
    f64::INFINITY
}
