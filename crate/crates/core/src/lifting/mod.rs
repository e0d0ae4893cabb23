//! Polynomial lifting, EDMD fit of the Koopman matrix, modal energies and
//! projection onto the dominant modes.

pub mod linalg;
mod model_file;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
pub use linalg::C64;

/// Number of observables in the degree-3 monomial dictionary.
pub const P: usize = 10;
/// Default relative singular-value cutoff for every pseudoinverse.
pub const DEFAULT_SVD_CUTOFF: f64 = 1e-10;
/// Default number of retained modes.
pub const DEFAULT_N_MODES: usize = 8;

const ENERGY_CHUNK: usize = 8192;

/// Degree-3 monomials `[1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3]`.
#[inline]
pub fn lift(x: f64, y: f64) -> [f64; P] {
    let (x2, y2) = (x * x, y * y);
    [1.0, x, y, x2, x * y, y2, x2 * x, x2 * y, x * y2, y2 * y]
}

/// Lifted snapshot pairs, one column per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrices {
    pub psi_x: DMatrix<f64>,
    pub psi_y: DMatrix<f64>,
}

impl SnapshotMatrices {
    pub fn len(&self) -> usize {
        self.psi_x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lifts every consecutive pair of samples within each trajectory. Pairs never
/// straddle two trajectories.
pub fn build_snapshots<T: AsRef<[(f64, f64)]>>(trajectories: &[T]) -> Result<SnapshotMatrices> {
    if trajectories.is_empty() {
        return Err(Error::invalid("no trajectories"));
    }
    let mut m = 0;
    for (i, tr) in trajectories.iter().enumerate() {
        let n = tr.as_ref().len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "trajectory {i} has {n} samples, need at least 2"
            )));
        }
        m += n - 1;
    }
    let mut psi_x = DMatrix::<f64>::zeros(P, m);
    let mut psi_y = DMatrix::<f64>::zeros(P, m);
    let mut col = 0;
    for tr in trajectories {
        let tr = tr.as_ref();
        for pair in tr.windows(2) {
            psi_x
                .column_mut(col)
                .copy_from_slice(&lift(pair[0].0, pair[0].1));
            psi_y
                .column_mut(col)
                .copy_from_slice(&lift(pair[1].0, pair[1].1));
            col += 1;
        }
    }
    Ok(SnapshotMatrices { psi_x, psi_y })
}

/// Least-squares Koopman matrix `K = Psi_Y Psi_X^+`.
pub fn fit_koopman(s: &SnapshotMatrices, svd_cutoff: f64, exec: Execution) -> Result<DMatrix<f64>> {
    if s.is_empty() {
        return Err(Error::invalid("no snapshot pairs"));
    }
    let sol = linalg::lstsq_rows(&s.psi_x, &s.psi_y, svd_cutoff, exec)?;
    log::debug!(
        "Koopman fit: rank {} of {}, condition {:.3e}",
        sol.info.rank,
        s.psi_x.nrows(),
        sol.info.condition()
    );
    Ok(sol.k)
}

/// Mean squared modal coefficient `E_j = (1/M) sum_k |c_j(k)|^2` with
/// `C = V^+ Psi_X`.
pub fn mode_energies(
    right_eigvecs: &DMatrix<C64>,
    psi_x: &DMatrix<f64>,
    svd_cutoff: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    let (v_pinv, _) = linalg::pinv(right_eigvecs, svd_cutoff)?;
    let m = psi_x.ncols();
    if m == 0 {
        return Err(Error::invalid("no snapshots for mode energies"));
    }
    let rows = v_pinv.nrows();
    let partial = exec::map_chunks(exec, m, ENERGY_CHUNK, |range| {
        let mut acc = vec![0.0; rows];
        for k in range {
            let z = psi_x.column(k);
            for (j, a) in acc.iter_mut().enumerate() {
                let mut c = C64::new(0.0, 0.0);
                for (i, zi) in z.iter().enumerate() {
                    c += v_pinv[(j, i)] * zi;
                }
                *a += c.norm_sqr();
            }
        }
        acc
    });
    let mut total = vec![0.0; rows];
    for acc in partial {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
    }
    Ok(total.into_iter().map(|e| e / m as f64).collect())
}

/// Dominant-mode selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Ascending indices into the eigenvalue list.
    pub indices: Vec<usize>,
    /// True when a conjugate pair straddled the cutoff and was kept whole.
    pub widened: bool,
}

/// Picks the `n_modes` highest-energy modes (ties: lower index first). A
/// conjugate pair cut in half by the budget is kept whole.
pub fn select_dominant(
    energies: &[f64],
    partner: &[Option<usize>],
    n_modes: usize,
) -> Result<Selection> {
    let p = energies.len();
    if n_modes == 0 || n_modes > p {
        return Err(Error::invalid(format!(
            "n_modes must be in 1..={p}, got {n_modes}"
        )));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| energies[b].total_cmp(&energies[a]).then(a.cmp(&b)));
    let mut chosen = vec![false; p];
    for &j in &order[..n_modes] {
        chosen[j] = true;
    }
    let mut widened = false;
    for &j in &order[..n_modes] {
        if let Some(q) = partner.get(j).copied().flatten() {
            if !chosen[q] {
                chosen[q] = true;
                widened = true;
                warn!("mode budget {n_modes} splits conjugate pair ({j}, {q}); keeping both");
            }
        }
    }
    let indices = (0..p).filter(|&j| chosen[j]).collect();
    Ok(Selection { indices, widened })
}

/// Fitted Koopman model with its dominant-mode projection.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub k_matrix: DMatrix<f64>,
    pub eigenvalues: Vec<C64>,
    pub right_eigvecs: DMatrix<C64>,
    pub energies: Vec<f64>,
    /// Requested mode budget; `dominant_indices` may be one longer after
    /// conjugate-pair widening.
    pub n_modes: usize,
    pub dominant_indices: Vec<usize>,
    pub v_dom: DMatrix<C64>,
    pub v_dom_pinv: DMatrix<C64>,
    pub svd_cutoff: f64,
    partner: Vec<Option<usize>>,
    // Row-major split of v_dom_pinv for the per-sample projection.
    proj_re: Vec<[f64; P]>,
    proj_im: Vec<[f64; P]>,
}

impl KoopmanModel {
    /// Fits `K`, decomposes it, ranks modes by training energy and keeps the
    /// `n_modes` strongest.
    pub fn fit(
        snapshots: &SnapshotMatrices,
        n_modes: usize,
        svd_cutoff: f64,
        exec: Execution,
    ) -> Result<Self> {
        if snapshots.psi_x.nrows() != P {
            return Err(Error::invalid(format!(
                "expected {P} observables, got {}",
                snapshots.psi_x.nrows()
            )));
        }
        let k = fit_koopman(snapshots, svd_cutoff, exec)?;
        let eig = linalg::eig_real(&k)?;
        let energies = mode_energies(&eig.vectors, &snapshots.psi_x, svd_cutoff, exec)?;
        Self::assemble(k, eig.values, eig.vectors, energies, n_modes, svd_cutoff)
    }

    pub(crate) fn assemble(
        k_matrix: DMatrix<f64>,
        eigenvalues: Vec<C64>,
        right_eigvecs: DMatrix<C64>,
        energies: Vec<f64>,
        n_modes: usize,
        svd_cutoff: f64,
    ) -> Result<Self> {
        let partner = conjugate_partners(&eigenvalues);
        let sel = select_dominant(&energies, &partner, n_modes)?;
        Self::with_selection(
            k_matrix,
            eigenvalues,
            right_eigvecs,
            energies,
            n_modes,
            sel.indices,
            svd_cutoff,
        )
    }

    pub(crate) fn with_selection(
        k_matrix: DMatrix<f64>,
        eigenvalues: Vec<C64>,
        right_eigvecs: DMatrix<C64>,
        energies: Vec<f64>,
        n_modes: usize,
        dominant_indices: Vec<usize>,
        svd_cutoff: f64,
    ) -> Result<Self> {
        let p = k_matrix.nrows();
        if p != P
            || k_matrix.ncols() != P
            || eigenvalues.len() != P
            || right_eigvecs.shape() != (P, P)
            || energies.len() != P
        {
            return Err(Error::invalid("inconsistent Koopman model dimensions"));
        }
        if dominant_indices.is_empty() || dominant_indices.iter().any(|&j| j >= P) {
            return Err(Error::invalid("dominant mode indices out of range"));
        }
        let v_dom = right_eigvecs.select_columns(dominant_indices.iter());
        let (v_dom_pinv, info) = linalg::pinv(&v_dom, svd_cutoff)?;
        if info.rank < dominant_indices.len() {
            warn!(
                "dominant eigenvectors are rank deficient ({} of {})",
                info.rank,
                dominant_indices.len()
            );
        }
        let proj_re = v_dom_pinv
            .row_iter()
            .map(|r| std::array::from_fn(|i| r[i].re))
            .collect();
        let proj_im = v_dom_pinv
            .row_iter()
            .map(|r| std::array::from_fn(|i| r[i].im))
            .collect();
        let partner = conjugate_partners(&eigenvalues);
        Ok(Self {
            k_matrix,
            eigenvalues,
            right_eigvecs,
            energies,
            n_modes,
            dominant_indices,
            v_dom,
            v_dom_pinv,
            svd_cutoff,
            partner,
            proj_re,
            proj_im,
        })
    }

    pub fn is_selected(&self, j: usize) -> bool {
        self.dominant_indices.contains(&j)
    }

    /// Index of the complex-conjugate partner of mode `j`, if any.
    pub fn partner(&self, j: usize) -> Option<usize> {
        self.partner.get(j).copied().flatten()
    }

    /// `||V_dom^+ z||^2` for an already lifted vector.
    #[inline]
    pub fn energy_of_lifted(&self, z: &[f64; P]) -> f64 {
        let mut total = 0.0;
        for (re, im) in self.proj_re.iter().zip(&self.proj_im) {
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..P {
                a += re[i] * z[i];
                b += im[i] * z[i];
            }
            total += a * a + b * b;
        }
        total
    }

    /// Lifts the measured state and returns its energy in the dominant subspace.
    #[inline]
    pub fn project_energy(&self, x_m: f64, y_m: f64) -> f64 {
        self.energy_of_lifted(&lift(x_m, y_m))
    }
}

fn conjugate_partners(values: &[C64]) -> Vec<Option<usize>> {
    let mut partner = vec![None; values.len()];
    for j in 0..values.len() {
        if values[j].im <= 0.0 || partner[j].is_some() {
            continue;
        }
        if let Some(q) = (0..values.len())
            .find(|&q| q != j && partner[q].is_none() && values[q] == values[j].conj())
        {
            partner[j] = Some(q);
            partner[q] = Some(j);
        }
    }
    partner
}

pub use model_file::{read_model, write_model};
