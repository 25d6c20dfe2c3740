//! Banded Cholesky factorization of the Dirichlet stiffness matrix, used to
//! precondition descent directions.

use crate::mesh::Mesh;

/// Lower-triangular band factor `L` with `K = L Lᵀ`.
#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    bw: usize,
    // Row i stores L[i][i - k] at i * (bw + 1) + k.
    data: Vec<f64>,
}

impl BandedCholesky {
    /// Factor `K_ij = ∫ ∇φᵢ·∇φⱼ` restricted to the free nodes of `mesh`.
    pub(crate) fn stiffness(mesh: &Mesh) -> Self {
        let n = mesh.free_nodes().len();
        let mut bw = 0;
        for e in 0..mesh.n_elements() {
            let dofs: Vec<usize> = mesh.element(e).iter().filter_map(|&v| mesh.dof_of_node(v)).collect();
            for &a in &dofs {
                for &b in &dofs {
                    bw = bw.max(a.abs_diff(b));
                }
            }
        }
        let mut data = vec![0.0; n * (bw + 1)];
        for e in 0..mesh.n_elements() {
            let area = mesh.element_measures()[e];
            let el = mesh.element(e);
            let grads = mesh.basis_gradients(e);
            for (a, ga) in el.iter().zip(grads) {
                let Some(i) = mesh.dof_of_node(*a) else { continue };
                for (b, gb) in el.iter().zip(grads) {
                    let Some(j) = mesh.dof_of_node(*b) else { continue };
                    if j <= i {
                        data[i * (bw + 1) + (i - j)] += area * (ga[0] * gb[0] + ga[1] * gb[1]);
                    }
                }
            }
        }
        let mut f = BandedCholesky { n, bw, data };
        f.factor();
        f
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bw + 1) + (i - j)]
    }

    fn factor(&mut self) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let start = i.saturating_sub(self.bw);
            for j in start..=i {
                let mut s = self.data[i * w + (i - j)];
                let kstart = start.max(j.saturating_sub(self.bw));
                for k in kstart..j {
                    s -= self.at(i, k) * self.at(j, k);
                }
                if i == j {
                    // K is SPD on the free nodes; guard against round-off only.
                    self.data[i * w] = s.max(f64::MIN_POSITIVE).sqrt();
                } else {
                    self.data[i * w + (i - j)] = s / self.at(j, j);
                }
            }
        }
    }

    /// Solve `K x = b` in place.
    pub(crate) fn solve(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }
}
