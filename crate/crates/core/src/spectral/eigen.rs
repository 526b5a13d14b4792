//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by the implicit QL method.
//!
//! Storage is transposed relative to the textbook formulation so that the
//! hot loops (column updates in the reduction, Givens rotations in QL) walk
//! contiguous memory; on exit row `c` of the work buffer is eigenvector `c`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Eigenvalues in ascending order and the matching unit eigenvectors as
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

const MAX_QL_ITERS: usize = 64;
const SYMMETRY_TOL: f64 = 1e-9;

/// Full eigendecomposition of a symmetric matrix.
///
/// Each eigenvector is sign-normalized so that its largest-magnitude entry
/// is positive; when several entries share that magnitude the lowest index
/// decides.
pub fn eigendecompose(matrix: &Array2<f64>) -> Result<Eigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::invalid(format!(
            "eigendecompose: matrix is {}x{}, not square",
            n,
            matrix.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("eigendecompose: empty matrix"));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (matrix[[i, j]], matrix[[j, i]]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::invalid("eigendecompose: non-finite entry"));
            }
            asym = asym.max((a - b).abs());
        }
        if !matrix[[i, i]].is_finite() {
            return Err(Error::invalid("eigendecompose: non-finite entry"));
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::invalid(format!(
            "eigendecompose: matrix not symmetric (max |a_ij - a_ji| = {asym:.3e})"
        )));
    }

    // Symmetrize exactly; with the transposed storage w[b*n + a] = V[a][b]
    // and a symmetric input the starting buffer is the matrix itself.
    let mut w = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
        }
    }
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tridiagonalize(&mut w, &mut d, &mut e, n);
    ql_implicit(&mut w, &mut d, &mut e, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let values = Array1::from_iter(order.iter().map(|&c| d[c]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (col, &c) in order.iter().enumerate() {
        let v = &w[c * n..(c + 1) * n];
        let sign = canonical_sign(v);
        for (k, &x) in v.iter().enumerate() {
            vectors[[k, col]] = sign * x;
        }
    }
    Ok(Eigen { values, vectors })
}

fn canonical_sign(v: &[f64]) -> f64 {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // entries within rounding of the maximum count as tied
    let lead = v.iter().find(|x| x.abs() >= max * (1.0 - 1e-9)).copied().unwrap_or(0.0);
    if lead < 0.0 {
        -1.0
    } else {
        1.0
    }
}

macro_rules! at {
    ($w:ident, $n:expr, $r:expr, $c:expr) => {
        $w[($c) * $n + ($r)]
    };
}

/// Householder reduction; leaves the diagonal in `d`, the subdiagonal in
/// `e[1..]` and the accumulated orthogonal transform in `w`.
fn tridiagonalize(w: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    for j in 0..n {
        d[j] = at!(w, n, n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = at!(w, n, i - 1, j);
                at!(w, n, i, j) = 0.0;
                at!(w, n, j, i) = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                at!(w, n, j, i) = f;
                g = e[j] + at!(w, n, j, j) * f;
                let col = &w[j * n..j * n + i];
                for k in j + 1..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = &mut w[j * n..j * n + i];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = at!(w, n, i - 1, j);
                at!(w, n, i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        at!(w, n, n - 1, i) = at!(w, n, i, i);
        at!(w, n, i, i) = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = at!(w, n, k, i + 1) / h;
            }
            let (head, tail) = w.split_at_mut((i + 1) * n);
            let next = &tail[..=i];
            for j in 0..=i {
                let col = &mut head[j * n..j * n + i + 1];
                let g: f64 = next.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            at!(w, n, k, i + 1) = 0.0;
        }
    }
    for j in 0..n {
        d[j] = at!(w, n, n - 1, j);
        at!(w, n, n - 1, j) = 0.0;
    }
    at!(w, n, n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal matrix, rotating `w` along.
fn ql_implicit(w: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERS {
                    return Err(Error::NoConvergence(format!(
                        "eigendecompose: eigenvalue {l} of {n} not converged after {MAX_QL_ITERS} QL iterations"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..];
                    let vi1 = &mut hi[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
