use std::f64::consts::PI;

use g2cr::exterior::KForm;
use g2cr::field::*;

mod common;
use common::*;
use nalgebra::DMatrix;

const POINTS: [Point; 4] = [
    [0.13, 0.71, 0.42, 0.05, 0.88, 0.37, 0.6],
    [0.61, 0.02, 0.93, 0.47, 0.21, 0.75, 0.33],
    [0.9, 0.44, 0.18, 0.66, 0.52, 0.09, 0.97],
    [0.27, 0.58, 0.81, 0.3, 0.04, 0.69, 0.15],
];

fn conformal(epsilon: f64, n: usize) -> StructureField {
    StructureField::new(
        Family::Conformal {
            epsilon,
            frequency: 1,
        },
        n,
    )
}

fn christoffel_error(a: &Christoffel, b: &Christoffel) -> f64 {
    let mut e: f64 = 0.0;
    for k in 0..7 {
        for i in 0..7 {
            for j in 0..7 {
                e = e.max((a[k][i][j] - b[k][i][j]).abs());
            }
        }
    }
    e
}

fn curvature_error(a: &Curvature, b: &Curvature) -> f64 {
    let mut e: f64 = 0.0;
    for i in 0..7 {
        for j in 0..7 {
            for k in 0..7 {
                for l in 0..7 {
                    e = e.max((a.get(i, j, k, l) - b.get(i, j, k, l)).abs());
                }
            }
        }
    }
    e
}

#[test]
fn conformal_christoffel_symbols_converge_at_second_order() {
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n in [16, 32, 64] {
        let f = conformal(0.1, n);
        let e = POINTS
            .iter()
            .map(|p| {
                christoffel_error(
                    &christoffel_at(&f, p, f.step()),
                    &conformal_christoffel(&f, p),
                )
            })
            .fold(0.0, f64::max);
        errs.push(e);
        hs.push(f.step());
    }
    assert!(errs[2] < 1e-2, "{errs:?}");
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn conformal_curvature_converges_at_second_order() {
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n in [16, 32, 64] {
        let f = conformal(0.1, n);
        let e = POINTS
            .iter()
            .map(|p| curvature_error(&levi_civita(&f, p).curvature, &conformal_curvature(&f, p)))
            .fold(0.0, f64::max);
        errs.push(e);
        hs.push(f.step());
    }
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn christoffel_symbols_are_symmetric() {
    let f = StructureField::new(
        Family::GenericPerturbed {
            epsilon: 0.1,
            frequency: DEFAULT_FREQUENCY,
        },
        16,
    );
    let g = christoffel_at(&f, &POINTS[0], f.step());
    for k in 0..7 {
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(g[k][i][j], g[k][j][i]);
            }
        }
    }
}

#[test]
fn first_bianchi_identity_shrinks_with_step() {
    let fam = Family::GenericPerturbed {
        epsilon: 0.1,
        frequency: DEFAULT_FREQUENCY,
    };
    let defects: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let f = StructureField::new(fam.clone(), n);
            levi_civita(&f, &POINTS[1]).curvature.bianchi_defect()
        })
        .collect();
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    assert!(defects[2] < 1e-2, "{defects:?}");
    assert!(slope(&hs, &defects) >= 1.9, "{defects:?}");
}

#[test]
fn metric_compatibility_defect_shrinks_with_step() {
    let fam = Family::GenericPerturbed {
        epsilon: 0.1,
        frequency: DEFAULT_FREQUENCY,
    };
    let defects: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            levi_civita(&StructureField::new(fam.clone(), n), &POINTS[2]).compatibility_defect
        })
        .collect();
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    assert!(slope(&hs, &defects) >= 1.9, "{defects:?}");
}

#[test]
fn d_squared_vanishes_at_second_order() {
    // α = sin(2π(p₁ + 2p₃)) e²∧e⁵ + cos(2πp₇) e¹
    let alpha = |p: &Point| {
        let mut a = KForm::basis(7, &[1, 4])
            .unwrap()
            .scaled((2.0 * PI * (p[0] + 2.0 * p[2])).sin());
        let mut e = [0.0; 7];
        e[0] = (2.0 * PI * p[6]).cos();
        let b = KForm::covector(&e).unwrap();
        a = &a + &KForm::basis(7, &[2, 3]).unwrap().scaled(b.coeffs()[0]);
        a
    };
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n in [8usize, 16, 32] {
        let h = 1.0 / n as f64;
        let e = POINTS
            .iter()
            .map(|p| exterior_derivative(|q| exterior_derivative(alpha, q, h), p, h).max_abs())
            .fold(0.0, f64::max);
        errs.push(e);
        hs.push(h);
    }
    // the two central differences commute exactly, so d∘d is pure rounding
    assert!(errs.iter().all(|e| *e < 1e-9), "{errs:?}");
}

#[test]
fn exterior_derivative_converges_on_generic_family() {
    let fam = Family::GenericPerturbed {
        epsilon: 0.1,
        frequency: DEFAULT_FREQUENCY,
    };
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n in [16, 32, 64] {
        let f = StructureField::new(fam.clone(), n);
        let e = POINTS
            .iter()
            .map(|p| {
                let fd = exterior_derivative(|q| f.rho_at(q), p, f.step());
                (&fd - &f.exact_d_rho(p)).max_abs()
            })
            .fold(0.0, f64::max);
        errs.push(e);
        hs.push(f.step());
    }
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn integrability_threshold_separates_families() {
    let c = calibrate_integrability_constant(&POINTS);
    assert!(c > 0.0 && c.is_finite());
    for n in [16, 32] {
        let tau = integrability_threshold(c, n);
        let flat = fernandez_gray_residual(&StructureField::flat(n), &POINTS);
        assert!(flat.max() <= tau);
        let generic = StructureField::new(
            Family::GenericPerturbed {
                epsilon: 0.1,
                frequency: DEFAULT_FREQUENCY,
            },
            n,
        );
        assert!(fernandez_gray_residual(&generic, &POINTS).max() > tau);
        let closed = StructureField::new(
            Family::ClosedPerturbed {
                epsilon: 0.1,
                frequency: DEFAULT_FREQUENCY,
            },
            n,
        );
        let r = fernandez_gray_residual(&closed, &POINTS);
        assert!(r.d_rho <= tau);
        assert!(r.d_rho_star > tau);
    }
}

#[test]
fn conformal_structure_is_not_torsion_free() {
    let f = conformal(0.1, 32);
    let c = calibrate_integrability_constant(&POINTS);
    assert!(fernandez_gray_residual(&f, &POINTS).max() > integrability_threshold(c, 32));
}

#[test]
fn curvature_check_is_frame_independent() {
    let f = StructureField::new(
        Family::GenericPerturbed {
            epsilon: 0.1,
            frequency: DEFAULT_FREQUENCY,
        },
        16,
    );
    let p = &POINTS[3];
    let base = curvature_g2_check(&f, p).unwrap();
    assert!(base > 1e-3);
    // a rotation inside G2 (exponential of a stabilizer element) and a generic one
    let q = g2cr::g2::G2Point::standard().stabilizer_algebra()[3].clone() * 0.7;
    let rot = q.exp();
    let other = curvature_g2_check_rotated(&f, p, &rot).unwrap();
    assert!(
        (base - other).abs() <= 1e-9 * base.max(1.0),
        "{base} {other}"
    );
    let mut a = DMatrix::from_fn(7, 7, |i, j| ((i * 7 + j) as f64 * 0.37).sin());
    a = &a - a.transpose();
    let generic = curvature_check_norm(&f, p, &a.exp());
    assert!((generic - curvature_check_norm(&f, p, &DMatrix::identity(7, 7))).abs() <= 1e-9);
}

fn curvature_check_norm(f: &StructureField, p: &Point, rot: &DMatrix<f64>) -> f64 {
    curvature_g2_check_rotated(f, p, rot).unwrap()
}

#[test]
fn conformally_flat_curvature_is_not_in_g2() {
    let f = conformal(0.1, 32);
    assert!(curvature_g2_check(&f, &POINTS[0]).unwrap() > 1e-2);
}
