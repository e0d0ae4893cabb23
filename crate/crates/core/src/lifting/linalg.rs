//! Dense linear algebra for small operators: SVD pseudoinverses with a
//! relative cutoff, a chunked QR least-squares solver for tall snapshot
//! data, and eigenpairs of a real square matrix.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Schur, SVD};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};

pub type C64 = Complex<f64>;

const SVD_EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;

/// Columns per QR chunk in [`lstsq_rows`].
const QR_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinvInfo {
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min_kept: f64,
}

impl PinvInfo {
    pub fn condition(&self) -> f64 {
        if self.rank == 0 {
            f64::INFINITY
        } else {
            self.sigma_max / self.sigma_min_kept
        }
    }
}

/// Moore-Penrose pseudoinverse; singular values below `rel_cutoff * sigma_max`
/// are discarded.
pub fn pinv<T>(a: &DMatrix<T>, rel_cutoff: f64) -> Result<(DMatrix<T>, PinvInfo)>
where
    T: ComplexField<RealField = f64>,
{
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::invalid("pseudoinverse of an empty matrix"));
    }
    if a.iter().any(|v| !v.clone().is_finite()) {
        return Err(Error::Degenerate {
            reason: "non-finite matrix entries".into(),
            rank: 0,
            condition: f64::INFINITY,
        });
    }
    let svd = SVD::try_new(a.clone(), true, true, SVD_EPS, MAX_ITER).ok_or_else(|| {
        Error::Degenerate {
            reason: "SVD did not converge".into(),
            rank: 0,
            condition: f64::INFINITY,
        }
    })?;
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = rel_cutoff * sigma_max;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");

    let mut out = DMatrix::<T>::zeros(n, m);
    let mut rank = 0;
    let mut sigma_min_kept = f64::INFINITY;
    for (k, &s) in sv.iter().enumerate() {
        if sigma_max == 0.0 || s <= threshold {
            continue;
        }
        rank += 1;
        sigma_min_kept = sigma_min_kept.min(s);
        // out += v_k * (1/s) * u_k^H
        let vk = v_t.row(k).adjoint();
        let uk_h = u.column(k).adjoint();
        out += (vk * uk_h).unscale(s);
    }
    Ok((
        out,
        PinvInfo {
            rank,
            sigma_max,
            sigma_min_kept,
        },
    ))
}

/// Result of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    /// Minimiser `K` of `||Y - K X||_F` (p_y x p_x).
    pub k: DMatrix<f64>,
    pub info: PinvInfo,
}

/// Solves `min_K ||Y - K X||_F` where the columns of `X` (p_x x M) and `Y`
/// (p_y x M) are paired samples, returning the minimum-norm solution
/// `K = Y X^+`.
///
/// The stacked data `[X; Y]^T` is reduced to its triangular factor by QR over
/// fixed-size column chunks, so the tall M-dimension never enters an SVD.
pub fn lstsq_rows(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    rel_cutoff: f64,
    exec: Execution,
) -> Result<LstsqSolution> {
    let (px, m) = x.shape();
    let py = y.nrows();
    if y.ncols() != m {
        return Err(Error::invalid(
            "snapshot matrices have different column counts",
        ));
    }
    if m == 0 || px == 0 {
        return Err(Error::invalid("least squares with no data"));
    }
    let width = px + py;
    let reduce = |rows: DMatrix<f64>| -> DMatrix<f64> {
        // Zero rows leave A^T A unchanged and guarantee a square R.
        let rows = if rows.nrows() < width {
            rows.resize_vertically(width, 0.0)
        } else {
            rows
        };
        let r = rows.qr().unpack_r();
        r.rows(0, width).into_owned()
    };
    let partial = exec::map_chunks(exec, m, QR_CHUNK, |range| {
        let c = range.len();
        let mut a = DMatrix::<f64>::zeros(c, width);
        for (i, j) in range.enumerate() {
            for r in 0..px {
                a[(i, r)] = x[(r, j)];
            }
            for r in 0..py {
                a[(i, px + r)] = y[(r, j)];
            }
        }
        reduce(a)
    });
    let mut stacked = DMatrix::<f64>::zeros(partial.len() * width, width);
    for (i, r) in partial.iter().enumerate() {
        stacked.rows_mut(i * width, width).copy_from(r);
    }
    let r = if partial.len() == 1 {
        partial.into_iter().next().unwrap()
    } else {
        reduce(stacked)
    };

    let r11 = r.view((0, 0), (px, px)).into_owned();
    let r12 = r.view((0, px), (px, py)).into_owned();
    let (r11_pinv, info) = pinv(&r11, rel_cutoff)?;
    if info.rank == 0 {
        return Err(Error::Degenerate {
            reason: "snapshot matrix has no singular value above the cutoff".into(),
            rank: 0,
            condition: info.condition(),
        });
    }
    let k = (r11_pinv * r12).transpose();
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate {
            reason: "non-finite operator entries".into(),
            rank: info.rank,
            condition: info.condition(),
        });
    }
    Ok(LstsqSolution { k, info })
}

/// Eigenpairs of a real square matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    /// Unit-norm right eigenvectors as columns, same order as `values`.
    pub vectors: DMatrix<C64>,
    /// `partner[j] = Some(i)` when `values[i]` is the complex conjugate of `values[j]`.
    pub partner: Vec<Option<usize>>,
}

/// Right eigendecomposition of a real matrix.
///
/// Eigenvalues come from the real Schur form. Each eigenvector is the right
/// singular vector of `A - lambda I` for its smallest singular value, followed
/// by one Rayleigh-quotient refinement of lambda. The eigenvector of the
/// lower member of a conjugate pair is set to the exact conjugate of the upper
/// member's. Ordering: decreasing modulus, then decreasing imaginary part.
/// Phase: the largest-modulus component is real and positive.
pub fn eig_real(a: &DMatrix<f64>) -> Result<Eigen> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid(
            "eigendecomposition needs a non-empty square matrix",
        ));
    }
    let schur =
        Schur::try_new(a.clone(), f64::EPSILON, MAX_ITER).ok_or_else(|| Error::Degenerate {
            reason: "Schur iteration did not converge".into(),
            rank: 0,
            condition: f64::INFINITY,
        })?;
    let mut raw: Vec<C64> = schur.complex_eigenvalues().iter().cloned().collect();
    // Roundoff-level imaginary parts belong to real eigenvalues.
    for v in raw.iter_mut() {
        if v.im.abs() <= 1e-14 * v.norm().max(1.0) {
            v.im = 0.0;
        }
    }
    raw.sort_by(|p, q| {
        q.norm()
            .total_cmp(&p.norm())
            .then(q.im.total_cmp(&p.im))
            .then(q.re.total_cmp(&p.re))
    });

    let ac = a.map(|v| C64::new(v, 0.0));
    let mut values = raw.clone();
    let mut vectors = DMatrix::<C64>::zeros(n, n);
    let mut partner = vec![None; n];
    for j in 0..n {
        let lam = raw[j];
        if lam.im > 0.0 {
            let lower = (j + 1..n)
                .find(|&i| {
                    raw[i].im < 0.0 && (raw[i].conj() - lam).norm() <= 1e-10 * lam.norm().max(1.0)
                })
                .ok_or_else(|| Error::Degenerate {
                    reason: "complex eigenvalue without a conjugate partner".into(),
                    rank: n,
                    condition: f64::INFINITY,
                })?;
            let (l, v) = refine_pair(&ac, lam)?;
            values[j] = l;
            values[lower] = l.conj();
            vectors.set_column(j, &v);
            vectors.set_column(lower, &v.map(|z| z.conj()));
            partner[j] = Some(lower);
            partner[lower] = Some(j);
        } else if lam.im == 0.0 {
            let (l, v) = refine_real(a, lam.re)?;
            values[j] = C64::new(l, 0.0);
            vectors.set_column(j, &v.map(|z| C64::new(z, 0.0)));
        }
        // Lower members of a pair are filled together with the upper one.
    }
    Ok(Eigen {
        values,
        vectors,
        partner,
    })
}

fn null_vector<T>(m: DMatrix<T>) -> Result<DVector<T>>
where
    T: ComplexField<RealField = f64>,
{
    let svd = SVD::try_new(m, false, true, SVD_EPS, MAX_ITER).ok_or_else(|| Error::Degenerate {
        reason: "SVD did not converge in eigenvector extraction".into(),
        rank: 0,
        condition: f64::INFINITY,
    })?;
    let v_t = svd.v_t.expect("v_t requested");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty");
    Ok(v_t.row(k).adjoint())
}

fn shifted<T: ComplexField>(a: &DMatrix<T>, lam: T) -> DMatrix<T> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] -= lam.clone();
    }
    m
}

fn refine_real(a: &DMatrix<f64>, lam: f64) -> Result<(f64, DVector<f64>)> {
    let v = null_vector(shifted(a, lam))?;
    let lam = rayleigh(a, &v);
    let v = normalize_phase(null_vector(shifted(a, lam))?);
    Ok((lam, v))
}

fn refine_pair(a: &DMatrix<C64>, lam: C64) -> Result<(C64, DVector<C64>)> {
    let v = null_vector(shifted(a, lam))?;
    let lam = rayleigh(a, &v);
    let v = normalize_phase(null_vector(shifted(a, lam))?);
    Ok((lam, v))
}

fn rayleigh<T: ComplexField>(a: &DMatrix<T>, v: &DVector<T>) -> T {
    let av = a * v;
    v.dotc(&av) / v.dotc(v)
}

/// Unit 2-norm with the largest-modulus entry rotated onto the positive real axis.
pub fn normalize_phase<T>(v: DVector<T>) -> DVector<T>
where
    T: ComplexField<RealField = f64>,
{
    let (imax, _) = v.iter().enumerate().fold((0, -1.0), |(bi, bm), (i, z)| {
        let m = z.clone().modulus();
        // Strictly greater with a relative margin so ties resolve to the lower index.
        if m > bm * (1.0 + 1e-12) {
            (i, m)
        } else {
            (bi, bm)
        }
    });
    let pivot = v[imax].clone();
    let scale = pivot.clone().modulus();
    let phase = pivot.unscale(scale);
    let norm = v.norm();
    v.map(|z| z / phase.clone()).unscale(norm)
}

/// Frobenius norm of a real matrix.
pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
