use crate::fem::StructuredGrid;
use crate::Real;

/// Orthonormal fiber frame `(a_l, a_t, a_n)`.
pub type FiberFrame<T> = [[T; 3]; 3];

/// One fiber frame per element.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberField<T> {
    frames: Vec<FiberFrame<T>>,
}

impl<T: Real> FiberField<T> {
    pub fn from_frames(frames: Vec<FiberFrame<T>>) -> Self {
        Self { frames }
    }

    pub fn frame(&self, e: usize) -> &FiberFrame<T> {
        &self.frames[e]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Largest deviation from orthonormality over all frames.
    pub fn orthonormality_defect(&self) -> T {
        let dot = |a: &[T; 3], b: &[T; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        self.frames.iter().fold(T::zero(), |worst, f| {
            let mut w = worst;
            for i in 0..3 {
                for j in 0..3 {
                    let target = if i == j { T::one() } else { T::zero() };
                    w = w.max((dot(&f[i], &f[j]) - target).abs());
                }
            }
            w
        })
    }
}

/// Fiber angle at element midpoints, linear in the transmural (z) coordinate.
pub fn fiber_angle<T: Real>(grid: &StructuredGrid<T>, e: usize, angle_endo: T, angle_epi: T) -> T {
    let depth = grid.element_center(e)[2] / grid.extent()[2];
    angle_endo + (angle_epi - angle_endo) * depth
}

/// Transmurally rotating fibers: `a_l = (cos θ, sin θ, 0)`, `a_t = e_z`
/// (the rotation axis), `a_n = a_l × a_t`.
pub fn rotated_fibers<T: Real>(grid: &StructuredGrid<T>, angle_endo: T, angle_epi: T) -> FiberField<T> {
    let z = T::zero();
    let frames = (0..grid.num_elements())
        .map(|e| {
            let theta = fiber_angle(grid, e, angle_endo, angle_epi);
            let (s, c) = theta.sin_cos();
            [[c, s, z], [z, z, T::one()], [s, -c, z]]
        })
        .collect();
    FiberField { frames }
}
