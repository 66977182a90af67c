use crate::error::{Error, Result};
use crate::fem::{AxisBox, StructuredGrid};
use crate::Real;

/// Intracellular or extracellular medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Medium {
    Intra,
    Extra,
}

/// Region with its own conductivity coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct IschemicRegion<T> {
    pub region: AxisBox<T>,
    pub intra: [T; 3],
    pub extra: [T; 3],
}

/// Longitudinal, transverse and normal conductivities (Ω⁻¹ cm⁻¹) of both media.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivitySet<T> {
    pub intra: [T; 3],
    pub extra: [T; 3],
    pub ischemia: Option<IschemicRegion<T>>,
}

impl<T: Real> ConductivitySet<T> {
    /// Transversely isotropic set (`σ_n = σ_t`).
    pub fn transversely_isotropic(intra_lt: [T; 2], extra_lt: [T; 2]) -> Self {
        Self {
            intra: [intra_lt[0], intra_lt[1], intra_lt[1]],
            extra: [extra_lt[0], extra_lt[1], extra_lt[1]],
            ischemia: None,
        }
    }

    /// Healthy tissue: intracellular σ_l = 3e-3, σ_t = 3.1525e-4;
    /// extracellular σ_l = 2e-3, σ_t = 1.3514e-3.
    pub fn normal() -> Self {
        Self::transversely_isotropic([T::lit(3e-3), T::lit(3.1525e-4)], [T::lit(2e-3), T::lit(1.3514e-3)])
    }

    pub fn isotropic(sigma_i: T, sigma_e: T) -> Self {
        Self { intra: [sigma_i; 3], extra: [sigma_e; 3], ischemia: None }
    }

    /// Adds a region inside which every coefficient is halved.
    pub fn with_ischemic_box(mut self, region: AxisBox<T>) -> Self {
        let half = T::lit(0.5);
        self.ischemia = Some(IschemicRegion {
            region,
            intra: self.intra.map(|s| s * half),
            extra: self.extra.map(|s| s * half),
        });
        self
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            intra: self.intra.map(|s| s * factor),
            extra: self.extra.map(|s| s * factor),
            ischemia: self.ischemia.as_ref().map(|isc| IschemicRegion {
                region: isc.region,
                intra: isc.intra.map(|s| s * factor),
                extra: isc.extra.map(|s| s * factor),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<T> = self.intra.iter().chain(&self.extra).copied().collect();
        if let Some(isc) = &self.ischemia {
            all.extend(isc.intra.iter().chain(&isc.extra));
        }
        match all.iter().find(|s| !(**s >= T::zero())) {
            Some(s) => Err(Error::InvalidConfig(format!("conductivity coefficient {s} is negative"))),
            None => Ok(()),
        }
    }

    /// Coefficients of `medium` on element `e`.
    pub fn element_coefficients(&self, grid: &StructuredGrid<T>, e: usize, medium: Medium) -> [T; 3] {
        if let Some(isc) = &self.ischemia {
            if isc.region.contains(grid.element_center(e)) {
                return match medium {
                    Medium::Intra => isc.intra,
                    Medium::Extra => isc.extra,
                };
            }
        }
        match medium {
            Medium::Intra => self.intra,
            Medium::Extra => self.extra,
        }
    }

    /// Harmonic-mean coefficients `σ_i σ_e / (σ_i + σ_e)` used by the
    /// monodomain reduction.
    pub fn harmonic_mean(&self) -> Self {
        let hm = |a: [T; 3], b: [T; 3]| -> [T; 3] {
            let mut out = [T::zero(); 3];
            for d in 0..3 {
                out[d] = if a[d] + b[d] > T::zero() { a[d] * b[d] / (a[d] + b[d]) } else { T::zero() };
            }
            out
        };
        let bulk = hm(self.intra, self.extra);
        Self {
            intra: bulk,
            extra: bulk,
            ischemia: self.ischemia.as_ref().map(|isc| {
                let m = hm(isc.intra, isc.extra);
                IschemicRegion { region: isc.region, intra: m, extra: m }
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ischemic_coefficients_are_half_of_normal() {
        let g = StructuredGrid::new(4, 4, 4, 0.25, 0.25, 0.25).unwrap();
        let set = ConductivitySet::<f64>::normal().with_ischemic_box(AxisBox::fractional(&g, [0.4, 0.4, 0.0], [0.6, 0.6, 1.0]));
        let isc = set.ischemia.as_ref().unwrap();
        assert!((isc.intra[0] - 1.5e-3).abs() < 1e-18);
        assert!((isc.intra[1] - 1.57625e-4).abs() < 1e-18);
        // element at the centre column vs a corner element
        let centre = (0..g.num_elements()).find(|&e| isc.region.contains(g.element_center(e)));
        assert!(centre.is_none(), "4x4 grid has no element centre inside [0.4,0.6]");
        let g8 = StructuredGrid::new(8, 8, 2, 0.125, 0.125, 0.5).unwrap();
        let set8 = ConductivitySet::<f64>::normal().with_ischemic_box(AxisBox::fractional(&g8, [0.35, 0.35, 0.0], [0.65, 0.65, 1.0]));
        let inside = (0..g8.num_elements()).filter(|&e| set8.element_coefficients(&g8, e, Medium::Intra)[0] < 2e-3).count();
        assert_eq!(inside, 2 * 2 * 2);
    }

    #[test]
    fn negative_coefficient_is_rejected() {
        let mut set = ConductivitySet::<f64>::normal();
        set.extra[2] = -1e-4;
        assert!(set.validate().is_err());
    }
}
