//! Linear algebra backends for the DAE iteration matrices.
//!
//! Two factorizations are provided behind a common interface:
//!
//! * a dense LU (nalgebra) used for small systems and tests, and
//! * a banded LU with partial pivoting (LAPACK `dgbtrf`-style storage)
//!   combined with a Woodbury low-rank correction that captures the few
//!   out-of-band entries arising from inter-bed boundary coupling.
//!
//! Matrices are assembled from triplets in the caller's natural ordering; an
//! optional symmetric permutation maps states to a banded ordering (per-bed,
//! per-cell interleaving) before factorization.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("singular matrix at pivot {0}")]
    Singular(usize),
    #[error("entry ({0}, {1}) outside matrix of size {2}")]
    OutOfBounds(usize, usize, usize),
}

/// Backend selection for iteration-matrix factorization.
#[derive(Debug, Clone)]
pub enum LinearBackend {
    /// Dense LU; robust default for small systems.
    Dense,
    /// Banded LU with half-bandwidth `bandwidth` plus Woodbury correction for
    /// entries outside the band; `ordering[k]` maps natural index `k` to the
    /// banded position.
    Banded {
        bandwidth: usize,
        ordering: Vec<usize>,
    },
}

/// Banded matrix in LAPACK general-band storage with room for pivoting fill:
/// entry `(i, j)` lives at `ab[kl + ku + i - j + j * ldab]`, `ldab = 2 kl + ku + 1`.
#[derive(Debug, Clone)]
struct BandStorage {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
}

impl BandStorage {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ldab()
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }
}

/// LU factorization of a band matrix with partial pivoting.
#[derive(Debug, Clone)]
struct BandLu {
    store: BandStorage,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Factorize in place; `store` must have been assembled with upper width
    /// `ku` but allocated with the full `2 kl + ku + 1` rows for fill.
    fn factorize(mut store: BandStorage) -> Result<Self, LinalgError> {
        let n = store.n;
        let kl = store.kl;
        let ku_eff = store.kl + store.ku;
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let i_max = (j + kl).min(n - 1);
            let mut piv = j;
            let mut max_v = store.get(j, j).abs();
            for i in (j + 1)..=i_max {
                let v = store.get(i, j).abs();
                if v > max_v {
                    max_v = v;
                    piv = i;
                }
            }
            ipiv[j] = piv;
            if max_v == 0.0 {
                return Err(LinalgError::Singular(j));
            }
            if piv != j {
                let jj_max = (j + ku_eff).min(n - 1);
                for jj in j..=jj_max {
                    let a = store.get(j, jj);
                    let b = store.get(piv, jj);
                    store.set(j, jj, b);
                    store.set(piv, jj, a);
                }
            }
            let d = store.get(j, j);
            for i in (j + 1)..=i_max {
                let l = store.get(i, j) / d;
                store.set(i, j, l);
            }
            let jj_max = (j + ku_eff).min(n - 1);
            for jj in (j + 1)..=jj_max {
                let a_jjj = store.get(j, jj);
                if a_jjj != 0.0 {
                    for i in (j + 1)..=i_max {
                        let l = store.get(i, j);
                        if l != 0.0 {
                            store.add(i, jj, -l * a_jjj);
                        }
                    }
                }
            }
        }
        Ok(Self { store, ipiv })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.store.n;
        let kl = self.store.kl;
        let ku_eff = self.store.kl + self.store.ku;
        // Forward: apply row swaps and L.
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let i_max = (j + kl).min(n - 1);
                for i in (j + 1)..=i_max {
                    b[i] -= self.store.get(i, j) * bj;
                }
            }
        }
        // Backward: U.
        for j in (0..n).rev() {
            b[j] /= self.store.get(j, j);
            let bj = b[j];
            if bj != 0.0 {
                let i_min = j.saturating_sub(ku_eff);
                for i in i_min..j {
                    b[i] -= self.store.get(i, j) * bj;
                }
            }
        }
    }
}

/// A factorized iteration matrix; solves and exact products in the caller's
/// natural index ordering.
pub enum FactorizedMatrix {
    Dense {
        mat: DMatrix<f64>,
        lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    },
    Banded {
        lu: BandLuWoodbury,
        /// natural index -> banded position
        perm: Vec<usize>,
        /// Original triplets (natural ordering) for exact matvec.
        triplets: Vec<(usize, usize, f64)>,
        n: usize,
    },
}

/// Band LU plus Woodbury correction `M = B + U V^T` with `V` a column
/// selection: `M^{-1} = B^{-1} - B^{-1} U (I + V^T B^{-1} U)^{-1} V^T B^{-1}`.
pub struct BandLuWoodbury {
    band: BandLu,
    /// Out-of-band column indices (banded ordering); `V = [e_j]` for these.
    cols: Vec<usize>,
    /// `W = B^{-1} U`, dense `n x r`.
    w: DMatrix<f64>,
    /// LU of the capacitance matrix `I + V^T W`.
    cap: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl BandLuWoodbury {
    fn solve_in_place(&self, b: &mut [f64]) {
        self.band.solve_in_place(b);
        if let Some(cap) = &self.cap {
            let r = self.cols.len();
            let mut z = nalgebra::DVector::zeros(r);
            for (k, &j) in self.cols.iter().enumerate() {
                z[k] = b[j];
            }
            cap.solve_mut(&mut z);
            for i in 0..b.len() {
                let mut acc = 0.0;
                for k in 0..r {
                    acc += self.w[(i, k)] * z[k];
                }
                b[i] -= acc;
            }
        }
    }
}

impl FactorizedMatrix {
    pub fn n(&self) -> usize {
        match self {
            FactorizedMatrix::Dense { mat, .. } => mat.nrows(),
            FactorizedMatrix::Banded { n, .. } => *n,
        }
    }

    /// Solve `M x = b` in place (natural ordering).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        match self {
            FactorizedMatrix::Dense { lu, .. } => {
                let mut v = nalgebra::DVector::from_column_slice(b);
                lu.solve_mut(&mut v);
                b.copy_from_slice(v.as_slice());
            }
            FactorizedMatrix::Banded { lu, perm, .. } => {
                let mut scratch = vec![0.0; b.len()];
                for (k, &p) in perm.iter().enumerate() {
                    scratch[p] = b[k];
                }
                lu.solve_in_place(&mut scratch);
                for (k, &p) in perm.iter().enumerate() {
                    b[k] = scratch[p];
                }
            }
        }
    }

    /// Exact product `y = M x` with the originally assembled matrix.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        match self {
            FactorizedMatrix::Dense { mat, .. } => {
                let xv = nalgebra::DVector::from_column_slice(x);
                let yv = mat * xv;
                y.copy_from_slice(yv.as_slice());
            }
            FactorizedMatrix::Banded { triplets, .. } => {
                y.iter_mut().for_each(|v| *v = 0.0);
                for &(i, j, v) in triplets {
                    y[i] += v * x[j];
                }
            }
        }
    }
}

/// Assemble and factorize a matrix from triplets.
///
/// Duplicate `(i, j)` entries are summed. For the banded backend, entries
/// whose permuted positions fall outside the band are routed into the
/// Woodbury low-rank correction.
pub fn factorize(
    n: usize,
    triplets: &[(usize, usize, f64)],
    backend: &LinearBackend,
) -> Result<FactorizedMatrix, LinalgError> {
    for &(i, j, _) in triplets {
        if i >= n || j >= n {
            return Err(LinalgError::OutOfBounds(i, j, n));
        }
    }
    match backend {
        LinearBackend::Dense => {
            let mut mat = DMatrix::zeros(n, n);
            for &(i, j, v) in triplets {
                mat[(i, j)] += v;
            }
            let lu = mat.clone().lu();
            // nalgebra's LU does not signal singularity; check the diagonal.
            for k in 0..n {
                if lu.u()[(k, k)] == 0.0 {
                    return Err(LinalgError::Singular(k));
                }
            }
            Ok(FactorizedMatrix::Dense { mat, lu })
        }
        LinearBackend::Banded {
            bandwidth,
            ordering,
        } => {
            assert_eq!(ordering.len(), n, "ordering length must equal n");
            let kl = *bandwidth;
            let ku = *bandwidth;
            let mut store = BandStorage::new(n, kl, ku);
            // Out-of-band entries grouped by (permuted) column.
            let mut ob_cols: Vec<usize> = Vec::new();
            let mut ob_entries: Vec<(usize, usize, f64)> = Vec::new(); // (row, col, v)
            for &(i, j, v) in triplets {
                let pi = ordering[i];
                let pj = ordering[j];
                let diff = pi as isize - pj as isize;
                if -(ku as isize) <= diff && diff <= kl as isize {
                    store.add(pi, pj, v);
                } else {
                    if !ob_cols.contains(&pj) {
                        ob_cols.push(pj);
                    }
                    ob_entries.push((pi, pj, v));
                }
            }
            ob_cols.sort_unstable();
            let r = ob_cols.len();
            let band = BandLu::factorize(store)?;
            let (w, cap) = if r > 0 {
                let mut u = DMatrix::zeros(n, r);
                for (pi, pj, v) in &ob_entries {
                    let k = ob_cols.binary_search(pj).unwrap();
                    u[(*pi, k)] += *v;
                }
                let mut w = u;
                for k in 0..r {
                    let mut col: Vec<f64> = (0..n).map(|i| w[(i, k)]).collect();
                    band.solve_in_place(&mut col);
                    for i in 0..n {
                        w[(i, k)] = col[i];
                    }
                }
                let mut capm = DMatrix::identity(r, r);
                for (a, &j) in ob_cols.iter().enumerate() {
                    for k in 0..r {
                        capm[(a, k)] += w[(j, k)];
                    }
                }
                let cap = capm.lu();
                for k in 0..r {
                    if cap.u()[(k, k)] == 0.0 {
                        return Err(LinalgError::Singular(k));
                    }
                }
                (w, Some(cap))
            } else {
                (DMatrix::zeros(n, 0), None)
            };
            Ok(FactorizedMatrix::Banded {
                lu: BandLuWoodbury {
                    band,
                    cols: ob_cols,
                    w,
                    cap,
                },
                perm: ordering.clone(),
                triplets: triplets.to_vec(),
                n,
            })
        }
    }
}
