//! Tensile stresses under centric and eccentric tension.
//!
//! All arithmetic stays in kN, mm, mm^2 and mm^4; conversion to MPa
//! (kN/mm^2 x 1000) happens only at the reporting boundary. The eccentric
//! term is evaluated in the principal frame, with signs fixed so that the
//! boundary point on the fibre-concentrated side (the side the centroid
//! shift points to) carries the stress increase; selecting E as the
//! larger of the two boundary stresses makes the report independent of
//! that convention anyway.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::SectionProperties;

const KN_PER_MM2_TO_MPA: f64 = 1000.0;

/// Centric tension: sigma = N / A, in MPa.
pub fn uniform_stress(n_kn: f64, area_mm2: f64) -> Result<f64> {
    if !n_kn.is_finite() {
        return Err(Error::invalid("load force must be finite"));
    }
    if !(area_mm2.is_finite() && area_mm2 > 0.0) {
        return Err(Error::invalid("area must be positive"));
    }
    Ok(n_kn / area_mm2 * KN_PER_MM2_TO_MPA)
}

/// Moment created by a load acting at eccentricity `e` from the centroid.
pub fn bending_moment(n_kn: f64, e_mm: f64) -> f64 {
    n_kn * e_mm
}

/// Normal stress at a point with principal-frame coordinates `(c_1, c_2)`
/// millimetres from the centroid:
///
/// `sigma = N/A + (M_1 / I_1) c_2 - (M_2 / I_2) c_1`
///
/// in MPa. `I_1` is the moment about axis 1 and so integrates `c_2^2`:
/// each bending term divides its moment by the inertia built from the
/// same coordinate it multiplies. A zero moment of inertia is only an
/// error when it is paired with a nonzero moment; a vanishing moment
/// drops its term.
#[allow(clippy::too_many_arguments)]
pub fn stress_at_point(
    n_kn: f64,
    area_mm2: f64,
    m1_kn_mm: f64,
    m2_kn_mm: f64,
    i1_mm4: f64,
    i2_mm4: f64,
    c1_mm: f64,
    c2_mm: f64,
) -> Result<f64> {
    let mut sigma = uniform_stress(n_kn, area_mm2)? / KN_PER_MM2_TO_MPA;
    if m1_kn_mm != 0.0 {
        if !(i1_mm4.is_finite() && i1_mm4 > 0.0) {
            return Err(Error::invalid(
                "zero moment of inertia paired with a nonzero moment",
            ));
        }
        sigma += m1_kn_mm / i1_mm4 * c2_mm;
    }
    if m2_kn_mm != 0.0 {
        if !(i2_mm4.is_finite() && i2_mm4 > 0.0) {
            return Err(Error::invalid(
                "zero moment of inertia paired with a nonzero moment",
            ));
        }
        sigma -= m2_kn_mm / i2_mm4 * c1_mm;
    }
    Ok(sigma * KN_PER_MM2_TO_MPA)
}

/// Percentage increase of `value` over `base`.
pub fn percent_increase(base: f64, value: f64) -> Result<f64> {
    if base == 0.0 {
        if value == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::invalid("percent increase over a zero base"));
    }
    Ok(100.0 * (value - base) / base)
}

/// Stresses at the cross-section's reference points: the declared-area
/// estimate, the real centroid C, and the boundary points A and E where
/// the eccentricity line leaves the section. Fields for the eccentric
/// points are absent for a centric load.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct StressReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_exp_mpa: Option<f64>,
    pub sigma_c_mpa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_a_mpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_e_mpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub increase_pct_e: Option<f64>,
}

/// Evaluates the stresses at points C, A and E for a tensile load `n_kn`
/// acting at the geometric centroid. The load's eccentricity about the
/// section centroid is the centroid shift; its moments are taken as
/// `M_1 = N e_2` and `M_2 = -N e_1` so the increase lands on the side the
/// shift points to. E is whichever boundary intersection of the
/// eccentricity line carries the larger stress; A is the other one.
pub fn critical_point_stresses(
    props: &SectionProperties,
    n_kn: f64,
    declared_area_mm2: Option<f64>,
) -> Result<StressReport> {
    if !(n_kn.is_finite() && n_kn >= 0.0) {
        return Err(Error::invalid("load force must be non-negative"));
    }
    let sigma_exp_mpa = match declared_area_mm2 {
        Some(a) => Some(uniform_stress(n_kn, a)?),
        None => None,
    };
    let sigma_c_mpa = uniform_stress(n_kn, props.area_mm2)?;

    let ecc = match props.intersections.eccentricity {
        Some(pair) if !props.is_centric() => pair,
        _ => {
            return Ok(StressReport {
                sigma_exp_mpa,
                sigma_c_mpa,
                sigma_a_mpa: None,
                sigma_e_mpa: None,
                increase_pct_e: None,
            })
        }
    };

    let m1 = bending_moment(n_kn, props.e2_mm);
    let m2 = -bending_moment(n_kn, props.e1_mm);
    let eval = |p| -> Result<f64> {
        let (c1, c2) = props.principal_coords_mm(p);
        stress_at_point(
            n_kn,
            props.area_mm2,
            m1,
            m2,
            props.i1_mm4,
            props.i2_mm4,
            c1,
            c2,
        )
    };
    let s_fwd = eval(ecc.0)?;
    let s_bwd = eval(ecc.1)?;
    let (sigma_e, sigma_a) = if s_fwd >= s_bwd {
        (s_fwd, s_bwd)
    } else {
        (s_bwd, s_fwd)
    };

    Ok(StressReport {
        sigma_exp_mpa,
        sigma_c_mpa,
        sigma_a_mpa: Some(sigma_a),
        sigma_e_mpa: Some(sigma_e),
        increase_pct_e: Some(percent_increase(sigma_c_mpa, sigma_e)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::section_properties;
    use crate::image_io::{
        generate_synthetic, FixtureIntensities, SyntheticShape, SyntheticSpec,
    };
    use crate::raster::BinaryMask;
    use crate::weights::{assign_global, MaterialDensities};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_stress_published_rows() {
        // Straight and bent bar forces over the declared 8 mm bar area.
        let sigma = uniform_stress(68.02, 50.27).unwrap();
        assert_relative_eq!(sigma, 1353.28, max_relative = 5e-4);
        let sigma = uniform_stress(26.58, 50.27).unwrap();
        assert_relative_eq!(sigma, 528.71, max_relative = 5e-4);
        // Measured-area stress for the straight bar.
        let sigma = uniform_stress(68.02, 37.45).unwrap();
        assert_relative_eq!(sigma, 1815.94, max_relative = 5e-4);
    }

    #[test]
    fn uniform_stress_edge_cases() {
        assert_eq!(uniform_stress(0.0, 12.5).unwrap(), 0.0);
        assert!(uniform_stress(1.0, 0.0).is_err());
        assert!(uniform_stress(1.0, -3.0).is_err());
        assert!(uniform_stress(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn bending_moment_is_a_product() {
        assert_eq!(bending_moment(68.02, 0.0), 0.0);
        assert_relative_eq!(bending_moment(68.02, 0.024), 1.632, max_relative = 1e-3);
        assert_relative_eq!(bending_moment(26.58, 0.248), 6.592, max_relative = 1e-3);
    }

    #[test]
    fn stress_at_point_unit_case() {
        // N = 1 kN on 1 mm^2 plus a unit moment at unit lever arm doubles
        // the centric stress: 2 kN/mm^2 = 2000 MPa.
        let sigma = stress_at_point(1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(sigma, 2000.0);
    }

    #[test]
    fn stress_at_point_degenerates_to_uniform() {
        let direct = uniform_stress(7.3, 11.0).unwrap();
        let via_point = stress_at_point(7.3, 11.0, 0.0, 0.0, 4.0, 2.0, 0.7, -0.3).unwrap();
        assert_eq!(direct, via_point);
        // At the centroid the bending terms vanish regardless of moments.
        let at_c = stress_at_point(7.3, 11.0, 5.0, -2.0, 4.0, 2.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(at_c, direct);
    }

    #[test]
    fn stress_at_point_guards_inertia() {
        assert!(stress_at_point(1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(stress_at_point(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0).is_err());
        // Zero inertia is fine while the paired moment is zero.
        assert!(stress_at_point(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0).is_ok());
    }

    proptest! {
        #[test]
        fn stress_scales_linearly_with_load(
            n in 0.0f64..500.0,
            alpha in 0.0f64..8.0,
            a in 0.5f64..100.0,
            e1 in -0.5f64..0.5,
            e2 in -0.5f64..0.5,
            i1 in 0.5f64..200.0,
            i2 in 0.5f64..200.0,
            c1 in -5.0f64..5.0,
            c2 in -5.0f64..5.0,
        ) {
            let sigma = stress_at_point(n, a, n * e2, -n * e1, i1, i2, c1, c2).unwrap();
            let scaled = stress_at_point(
                alpha * n, a, alpha * n * e2, -(alpha * n) * e1, i1, i2, c1, c2,
            ).unwrap();
            prop_assert!((scaled - alpha * sigma).abs() <= 1e-9 * sigma.abs().max(1.0));
        }
    }

    #[test]
    fn percent_increase_matches_published_summary() {
        // Table-style inputs: extreme-point stress over centroid stress.
        let straight = percent_increase(1815.94, 1862.16).unwrap();
        assert_relative_eq!(straight, 2.55, epsilon = 0.05);
        let bent = percent_increase(694.14, 840.59).unwrap();
        assert_relative_eq!(bent, 21.10, epsilon = 0.05);
        assert_eq!(percent_increase(0.0, 0.0).unwrap(), 0.0);
        assert!(percent_increase(0.0, 1.0).is_err());
    }

    fn half_disc_props() -> SectionProperties {
        let spec = SyntheticSpec {
            shape: SyntheticShape::HalfDensityDisc {
                radius_px: 70.0,
                split_angle_deg: 30.0,
            },
            intensities: FixtureIntensities::default(),
            noise_amplitude: 0,
            noise_seed: 0,
        };
        let (image, _) = generate_synthetic(&spec, 170, 170, 0.01).unwrap();
        let mask = BinaryMask::from_fn(170, 170, |x, y| image.raster().get(x, y) > 60).unwrap();
        let weights =
            assign_global(&image, &mask, &MaterialDensities::default(), None).unwrap();
        section_properties(&mask, &weights, 0.01).unwrap()
    }

    #[test]
    fn eccentric_report_puts_the_increase_on_the_shift_side() {
        let props = half_disc_props();
        assert!(!props.is_centric());
        let report = critical_point_stresses(&props, 5.0, Some(50.27)).unwrap();

        let sigma_c = report.sigma_c_mpa;
        let sigma_a = report.sigma_a_mpa.unwrap();
        let sigma_e = report.sigma_e_mpa.unwrap();
        assert!(sigma_e > sigma_c, "E must exceed C: {sigma_e} vs {sigma_c}");
        assert!(sigma_e >= sigma_a);
        assert!(report.increase_pct_e.unwrap() > 0.0);
        assert_relative_eq!(
            report.increase_pct_e.unwrap(),
            100.0 * (sigma_e - sigma_c) / sigma_c,
            max_relative = 1e-12
        );

        // E sits on the side the shift points to: the forward eccentricity
        // intersection (marched along the shift) carries the larger stress.
        let ecc = props.intersections.eccentricity.unwrap();
        let stress_at = |p| {
            let (c1, c2) = props.principal_coords_mm(p);
            stress_at_point(
                5.0,
                props.area_mm2,
                bending_moment(5.0, props.e2_mm),
                -bending_moment(5.0, props.e1_mm),
                props.i1_mm4,
                props.i2_mm4,
                c1,
                c2,
            )
            .unwrap()
        };
        assert!(stress_at(ecc.0) > stress_at(ecc.1), "fibre side is hotter");
        assert_relative_eq!(stress_at(ecc.0), sigma_e, max_relative = 1e-12);
    }

    #[test]
    fn centric_report_has_no_eccentric_points() {
        let mask = BinaryMask::from_fn(41, 41, |x, y| {
            let dx = x as f64 - 20.0;
            let dy = y as f64 - 20.0;
            dx * dx + dy * dy <= 15.0 * 15.0
        })
        .unwrap();
        let weights = crate::weights::WeightMap::uniform(&mask, 1300.0).unwrap();
        let props = section_properties(&mask, &weights, 0.05).unwrap();
        assert!(props.is_centric());

        let report = critical_point_stresses(&props, 10.0, None).unwrap();
        assert!(report.sigma_exp_mpa.is_none());
        assert!(report.sigma_a_mpa.is_none());
        assert!(report.sigma_e_mpa.is_none());
        assert!(report.increase_pct_e.is_none());
        assert_relative_eq!(
            report.sigma_c_mpa,
            uniform_stress(10.0, props.area_mm2).unwrap()
        );
    }

    #[test]
    fn critical_point_stresses_rejects_compression() {
        let props = half_disc_props();
        assert!(critical_point_stresses(&props, -1.0, None).is_err());
    }

    #[test]
    fn zero_load_reports_zero_everywhere() {
        let props = half_disc_props();
        let report = critical_point_stresses(&props, 0.0, Some(50.27)).unwrap();
        assert_eq!(report.sigma_exp_mpa, Some(0.0));
        assert_eq!(report.sigma_c_mpa, 0.0);
        assert_eq!(report.sigma_a_mpa, Some(0.0));
        assert_eq!(report.sigma_e_mpa, Some(0.0));
        assert_eq!(report.increase_pct_e, Some(0.0));
    }
}
