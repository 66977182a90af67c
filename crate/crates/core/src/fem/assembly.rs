//! Q1 mass and stiffness assembly with 2×2×2 Gauss quadrature.

use crate::error::Result;
use crate::fem::{ConductivitySet, FiberField, Medium, StructuredGrid};
use crate::sparse::CsrMatrix;
use crate::Real;

/// Shape data of the trilinear hexahedron at the 8 Gauss points of an
/// `hx × hy × hz` element. Indices are `[q][a]`, quadrature point then node,
/// both with bit layout `(x, y, z) = (b & 1, (b >> 1) & 1, (b >> 2) & 1)`.
#[derive(Debug, Clone)]
pub struct Q1Element<T> {
    pub shape: [[T; 8]; 8],
    pub grad: [[[T; 3]; 8]; 8],
    /// Quadrature weight times Jacobian determinant (identical for all points).
    pub weight: T,
}

impl<T: Real> Q1Element<T> {
    pub fn new(h: [T; 3]) -> Self {
        let g = T::one() / T::lit(3.0).sqrt();
        let half = T::lit(0.5);
        let pts = [-g, g];
        let mut shape = [[T::zero(); 8]; 8];
        let mut grad = [[[T::zero(); 3]; 8]; 8];
        for q in 0..8 {
            let xi = [pts[q & 1], pts[(q >> 1) & 1], pts[(q >> 2) & 1]];
            for a in 0..8 {
                let s = [
                    if a & 1 == 1 { T::one() } else { -T::one() },
                    if (a >> 1) & 1 == 1 { T::one() } else { -T::one() },
                    if (a >> 2) & 1 == 1 { T::one() } else { -T::one() },
                ];
                let f: [T; 3] = [0, 1, 2].map(|d| half * (T::one() + s[d] * xi[d]));
                shape[q][a] = f[0] * f[1] * f[2];
                // dN/dx_d = (s_d / 2) * (2 / h_d) * prod_{e≠d} f_e
                grad[q][a] = [
                    s[0] / h[0] * f[1] * f[2],
                    s[1] / h[1] * f[0] * f[2],
                    s[2] / h[2] * f[0] * f[1],
                ];
            }
        }
        let weight = h[0] * h[1] * h[2] / T::lit(8.0);
        Self { shape, grad, weight }
    }

    pub fn mass(&self) -> [[T; 8]; 8] {
        let mut m = [[T::zero(); 8]; 8];
        for q in 0..8 {
            for a in 0..8 {
                for b in 0..8 {
                    m[a][b] += self.weight * self.shape[q][a] * self.shape[q][b];
                }
            }
        }
        m
    }

    /// Element stiffness for the constant tensor `d`.
    pub fn stiffness(&self, d: &[[T; 3]; 3]) -> [[T; 8]; 8] {
        let mut k = [[T::zero(); 8]; 8];
        for q in 0..8 {
            for a in 0..8 {
                let ga = self.grad[q][a];
                let dga = [0, 1, 2].map(|i| d[i][0] * ga[0] + d[i][1] * ga[1] + d[i][2] * ga[2]);
                for b in 0..8 {
                    let gb = self.grad[q][b];
                    k[a][b] += self.weight * (dga[0] * gb[0] + dga[1] * gb[1] + dga[2] * gb[2]);
                }
            }
        }
        k
    }
}

/// `D = Σ σ_m a_m a_mᵀ`
pub fn conductivity_tensor<T: Real>(frame: &[[T; 3]; 3], sigma: [T; 3]) -> [[T; 3]; 3] {
    let mut d = [[T::zero(); 3]; 3];
    for m in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] += sigma[m] * frame[m][i] * frame[m][j];
            }
        }
    }
    d
}

/// Zero-valued matrix with the 27-point nodal coupling pattern of the grid.
pub fn q1_pattern<T: Real>(grid: &StructuredGrid<T>) -> CsrMatrix<T> {
    let [nx, ny, nz] = grid.elements_per_axis();
    let n = grid.num_nodes();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n * 27);
    row_ptr.push(0);
    let range = |c: usize, max: usize| c.saturating_sub(1)..=(c + 1).min(max);
    for idx in 0..n {
        let [i, j, k] = grid.node_ijk(idx);
        for kk in range(k, nz) {
            for jj in range(j, ny) {
                for ii in range(i, nx) {
                    col_idx.push(grid.node_index(ii, jj, kk));
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    let nnz = col_idx.len();
    CsrMatrix::new(n, n, row_ptr, col_idx, vec![T::zero(); nnz]).expect("structured pattern is valid")
}

/// Positions of the 64 local entries of element `e` in a matrix with the
/// [`q1_pattern`] layout.
pub fn element_slots<T: Real>(pattern: &CsrMatrix<T>, nodes: &[usize; 8]) -> [[usize; 8]; 8] {
    let mut slots = [[0usize; 8]; 8];
    let (rp, ci) = (pattern.row_ptr(), pattern.col_idx());
    for a in 0..8 {
        let (s, e) = (rp[nodes[a]], rp[nodes[a] + 1]);
        let row = &ci[s..e];
        for b in 0..8 {
            slots[a][b] = s + row.binary_search(&nodes[b]).expect("element coupling present in pattern");
        }
    }
    slots
}

fn assemble_with<T: Real>(grid: &StructuredGrid<T>, local: impl Fn(usize) -> [[T; 8]; 8]) -> CsrMatrix<T> {
    let mut mat = q1_pattern(grid);
    for e in 0..grid.num_elements() {
        let nodes = grid.element_nodes(e);
        let slots = element_slots(&mat, &nodes);
        let ke = local(e);
        let vals = mat.values_mut();
        for a in 0..8 {
            for b in 0..8 {
                vals[slots[a][b]] += ke[a][b];
            }
        }
    }
    mat
}

/// Consistent Q1 mass matrix.
pub fn assemble_mass<T: Real>(grid: &StructuredGrid<T>) -> CsrMatrix<T> {
    let me = Q1Element::new(grid.spacing()).mass();
    assemble_with(grid, |_| me)
}

/// Stiffness for fiber-aligned coefficients `σ = (σ_l, σ_t, σ_n)` applied on
/// every element.
pub fn assemble_stiffness<T: Real>(grid: &StructuredGrid<T>, fibers: &FiberField<T>, sigma: [T; 3]) -> Result<CsrMatrix<T>> {
    ConductivitySet { intra: sigma, extra: sigma, ischemia: None }.validate()?;
    let el = Q1Element::new(grid.spacing());
    Ok(assemble_with(grid, |e| el.stiffness(&conductivity_tensor(fibers.frame(e), sigma))))
}

/// Stiffness of one medium of a conductivity set (honours ischemic regions).
pub fn assemble_conductivity<T: Real>(
    grid: &StructuredGrid<T>,
    fibers: &FiberField<T>,
    set: &ConductivitySet<T>,
    medium: Medium,
) -> Result<CsrMatrix<T>> {
    set.validate()?;
    let el = Q1Element::new(grid.spacing());
    Ok(assemble_with(grid, |e| {
        el.stiffness(&conductivity_tensor(fibers.frame(e), set.element_coefficients(grid, e, medium)))
    }))
}

/// Unit isotropic Laplacian (H¹ seminorm matrix).
pub fn assemble_laplacian<T: Real>(grid: &StructuredGrid<T>) -> CsrMatrix<T> {
    let el = Q1Element::new(grid.spacing());
    let mut id = [[T::zero(); 3]; 3];
    (0..3).for_each(|i| id[i][i] = T::one());
    let ke = el.stiffness(&id);
    assemble_with(grid, |_| ke)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::rotated_fibers;

    fn unit() -> StructuredGrid<f64> {
        StructuredGrid::new(1, 1, 1, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn unit_element_mass_rows_and_corner() {
        let m = assemble_mass(&unit());
        for i in 0..8 {
            let s: f64 = m.row(i).map(|(_, v)| v).sum();
            assert!((s - 0.125).abs() < 1e-15);
        }
        // ∫_0^1 (1-x)^2 dx = 1/3 in each direction
        assert!((m.get(0, 0) - 1.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn mass_total_is_volume() {
        let g = StructuredGrid::new(3, 2, 5, 0.1, 0.3, 0.07).unwrap();
        let m = assemble_mass(&g);
        let total: f64 = m.values().iter().sum();
        assert!((total - g.volume()).abs() < 1e-14 * g.volume().max(1.0));
        assert!(m.values().iter().all(|&v| v >= 0.0));
        assert!(m.symmetry_defect() < 1e-18);
    }

    #[test]
    fn isotropic_unit_element_diagonal() {
        let g = unit();
        let k = assemble_stiffness(&g, &rotated_fibers(&g, 0.3, -0.8), [1.0, 1.0, 1.0]).unwrap();
        for i in 0..8 {
            assert!((k.get(i, i) - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_sigma_is_rejected() {
        let g = unit();
        assert!(assemble_stiffness(&g, &rotated_fibers(&g, 0.0, 0.0), [1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let g = StructuredGrid::<f64>::new(3, 3, 3, 0.1, 0.1, 0.1).unwrap();
        let f = rotated_fibers(&g, -1.0, 1.0);
        let set = ConductivitySet::normal();
        let a = assemble_conductivity(&g, &f, &set, Medium::Intra).unwrap();
        let b = assemble_conductivity(&g, &f, &set, Medium::Intra).unwrap();
        assert_eq!(a.row_ptr(), b.row_ptr());
        assert_eq!(a.col_idx(), b.col_idx());
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
