use g2cr::exterior::KForm;
use g2cr::field::*;
use g2cr::g2::{unit, G2Point};
use g2cr::sampling;
use g2cr::twistor::*;
use nalgebra::{Complex, DMatrix};

mod common;
use common::*;

fn generic(epsilon: f64, n: usize) -> StructureField {
    StructureField::new(
        Family::GenericPerturbed {
            epsilon,
            frequency: DEFAULT_FREQUENCY,
        },
        n,
    )
}

fn conformal(n: usize) -> StructureField {
    StructureField::new(
        Family::Conformal {
            epsilon: 0.1,
            frequency: 1,
        },
        n,
    )
}

fn points(seed: u64, count: usize) -> Vec<(Point, [f64; 7])> {
    sampling::twistor_samples(seed, count)
}

#[test]
fn twistor_point_frames_are_orthonormal() {
    for field in [conformal(16), generic(0.1, 16)] {
        for (m, x) in points(11, 20) {
            let tp = twistor_point(&field, &m, &x).unwrap();
            assert!((tp.metric().norm(&tp.x) - 1.0).abs() <= 1e-10);
            let hor = tp.horizontal_basis();
            let ver = tp.vertical_basis();
            let all: Vec<Ambient> = hor.iter().chain(ver.iter()).copied().collect();
            for (i, u) in all.iter().enumerate() {
                for (j, v) in all.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((tp.inner(u, v) - expect).abs() <= 1e-10, "{i} {j}");
                }
            }
            for b in tp.b_basis() {
                assert!(tp.inner(&tp.theta(), &b).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn flat_theta_and_b_are_constant_frame_objects() {
    let f = StructureField::flat(16);
    for (m, x) in points(5, 10) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        let theta = tp.theta();
        for i in 0..7 {
            assert_eq!(theta[i], tp.x[i]);
            assert_eq!(theta[7 + i], 0.0);
        }
        for b in tp.b_basis() {
            let dot: f64 = (0..7).map(|i| b[i] * tp.x[i]).sum();
            assert!(dot.abs() <= 1e-12);
            assert!(b[7..].iter().all(|c| *c == 0.0));
        }
    }
}

#[test]
fn conformal_horizontal_lift_uses_the_christoffel_correction() {
    let f = conformal(32);
    for (m, x) in points(8, 10) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        let oracle = conformal_christoffel(&f, &m);
        let v = [0.4, -0.3, 0.2, 0.5, -0.1, 0.6, 0.3];
        let lift = tp.local.lift(&v);
        let naive_gap: f64 = (7..14).map(|k| lift[k].abs()).fold(0.0, f64::max);
        assert!(naive_gap > 1e-3);
        let expect = christoffel_apply(&oracle, &v, &tp.x);
        for k in 0..7 {
            assert!((lift[7 + k] + expect[k]).abs() <= 0.05 * f.step().powi(2) * 40.0);
        }
        // d/dt g(x, x) along the lift vanishes: ∂ᵥ(e^{2f})|x|² + 2 e^{2f} x·fiber
        let df: f64 = f
            .conformal_gradient(&m)
            .iter()
            .zip(&v)
            .map(|(a, b)| a * b)
            .sum();
        let e2f = (2.0 * f.conformal_factor(&m)).exp();
        let xx: f64 = tp.x.iter().map(|c| c * c).sum();
        let xf: f64 = (0..7).map(|k| tp.x[k] * lift[7 + k]).sum();
        let rate = 2.0 * df * e2f * xx + 2.0 * e2f * xf;
        assert!(rate.abs() <= 40.0 * f.step().powi(2), "{rate}");
    }
}

#[test]
fn cr_splitting_invariants() {
    for field in [StructureField::flat(16), generic(0.1, 16)] {
        for (m, x) in points(21, 10) {
            let tp = twistor_point(&field, &m, &x).unwrap();
            let cr = cr_splitting(&tp);
            let ib = cr.i_b.matrix();
            assert!((ib * ib + DMatrix::identity(6, 6)).amax() <= 1e-10);
            for a in 0..3 {
                for k in 0..6 {
                    // (I − i) b = 0 on B^{1,0}
                    let ib_b: Complex<f64> = (0..6)
                        .map(|j| cr.b10[a][j] * ib[(k, j)])
                        .sum::<Complex<f64>>();
                    assert!((ib_b - Complex::<f64>::i() * cr.b10[a][k]).norm() <= 1e-10);
                    assert_eq!(cr.b01[a][k], cr.b10[a][k].conj());
                }
            }
            // the six vectors span B ⊗ ℂ
            let mut mat = DMatrix::<Complex<f64>>::zeros(6, 6);
            for a in 0..3 {
                for k in 0..6 {
                    mat[(k, a)] = cr.b10[a][k];
                    mat[(k, a + 3)] = cr.b01[a][k];
                }
            }
            assert!(mat.determinant().norm() > 1e-6);
        }
    }
}

#[test]
fn flat_cr_splitting_at_first_axis() {
    let f = StructureField::flat(16);
    let tp = twistor_point(&f, &[0.5; 7], &unit(0)).unwrap();
    let cr = cr_splitting(&tp);
    // B^{1,0} = span{e₂ − ie₃, e₄ − ie₅, e₆ − ie₇}
    for a in 0..3 {
        let mut v = [Complex::new(0.0, 0.0); 7];
        for k in 0..6 {
            for i in 0..7 {
                v[i] += cr.b10[a][k] * tp.frame[k][i];
            }
        }
        for i in 0..7 {
            let expect = if i == 2 * a + 1 {
                Complex::new(0.5, 0.0)
            } else if i == 2 * a + 2 {
                Complex::new(0.0, -0.5)
            } else {
                Complex::new(0.0, 0.0)
            };
            assert!((v[i] - expect).norm() <= 1e-12, "{a} {i} {:?}", v[i]);
        }
    }
}

#[test]
fn bracket_is_exactly_antisymmetric() {
    let f = generic(0.1, 16);
    let (m, x) = points(3, 1)[0];
    let tp = twistor_point(&f, &m, &x).unwrap();
    let b = tp.distribution_basis(Polarity::Antiholomorphic);
    let v = to_complex(&tp.vertical_basis()[2]);
    let xy = frobenius_bracket(&f, &tp, &b[0], &v, f.step());
    let yx = frobenius_bracket(&f, &tp, &v, &b[0], f.step());
    for i in 0..14 {
        assert_eq!(xy[i], -yx[i]);
    }
}

#[test]
fn flat_horizontal_brackets_have_no_vertical_part() {
    let f = StructureField::flat(16);
    for (m, x) in points(4, 10) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        let a = to_complex(&tp.local.lift(&[0.3, 0.1, -0.5, 0.2, 0.7, 0.0, 0.4]));
        let b = to_complex(&tp.local.lift(&[-0.2, 0.6, 0.1, 0.3, -0.4, 0.5, 0.1]));
        let br = frobenius_bracket(&f, &tp, &a, &b, f.step());
        let vert = tp.local.vertical_part(&br);
        assert!(vert.iter().all(|c| c.norm() <= 1e-12));
    }
}

/// `max |vertical([X̃,Ỹ]) + R(X,Y)x|` against the closed-form curvature.
fn claim_residual(n: usize, count: usize) -> f64 {
    let f = conformal(n);
    let mut r = sampling::rng(99, 1);
    let mut worst: f64 = 0.0;
    for (m, x) in points(99, count) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        let xv = sampling::unit_vector(&mut r, 7);
        let yv = sampling::unit_vector(&mut r, 7);
        let br = frobenius_bracket(
            &f,
            &tp,
            &to_complex(&tp.local.lift(&xv)),
            &to_complex(&tp.local.lift(&yv)),
            f.step(),
        );
        let vert = tp.local.vertical_part(&br);
        let oracle = conformal_curvature(&f, &m);
        let lowered = oracle.apply_lowered(&xv, &yv, &tp.x);
        let e2f = (2.0 * f.conformal_factor(&m)).exp();
        let diff: Vec<f64> = (0..7).map(|k| vert[k].re + lowered[k] / e2f).collect();
        assert!(vert.iter().all(|c| c.im == 0.0));
        worst = worst.max(tp.metric().norm(&diff));
    }
    worst
}

#[test]
fn vertical_bracket_matches_curvature_oracle() {
    let ns = [8, 16, 32];
    let errs: Vec<f64> = ns.iter().map(|&n| claim_residual(n, 10)).collect();
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    assert!(slope(&hs, &errs) >= 1.0, "{errs:?}");
    assert!(errs[2] < errs[0], "{errs:?}");
}

#[test]
fn flat_field_is_involutive() {
    let f = StructureField::flat(16);
    for (m, x) in points(13, 50) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        assert!(involutivity_residual(&f, &tp, f.step()) <= 1e-10);
    }
}

#[test]
fn conjugate_distributions_have_equal_residuals() {
    let f = generic(0.05, 16);
    for (m, x) in points(17, 5) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        let a = involutivity_report(
            &f,
            &tp,
            f.step(),
            Polarity::Antiholomorphic,
            Extension::Adapted,
        );
        let b = involutivity_report(&f, &tp, f.step(), Polarity::Holomorphic, Extension::Adapted);
        assert_eq!(a.residual, b.residual);
        assert!(a.residual > 1e-3);
    }
}

#[test]
fn residual_is_independent_of_the_extension() {
    let (m, x) = points(23, 1)[0];
    let gaps: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let f = generic(0.1, n);
            let tp = twistor_point(&f, &m, &x).unwrap();
            let a = involutivity_report(
                &f,
                &tp,
                f.step(),
                Polarity::Antiholomorphic,
                Extension::Adapted,
            );
            let b = involutivity_report(
                &f,
                &tp,
                f.step(),
                Polarity::Antiholomorphic,
                Extension::Twisted,
            );
            (a.residual - b.residual).abs()
        })
        .collect();
    // O(h): halving h at least halves the gap
    assert!(gaps[1] <= 0.5 * gaps[0], "{gaps:?}");
}

#[test]
fn step1_is_zero_on_the_flat_field() {
    let f = StructureField::flat(16);
    for (m, x) in points(2, 10) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        assert_eq!(step1_vertical_obstruction(&f, &tp).unwrap(), 0.0);
    }
}

#[test]
fn step1_matches_vertical_bracket() {
    let (m, x) = points(31, 1)[0];
    let gaps: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let f = generic(0.1, n);
            let tp = twistor_point(&f, &m, &x).unwrap();
            let r = involutivity_report(
                &f,
                &tp,
                f.step(),
                Polarity::Antiholomorphic,
                Extension::Adapted,
            );
            (r.vertical - step1_vertical_obstruction(&f, &tp).unwrap()).abs()
        })
        .collect();
    assert!(gaps[1] <= 0.5 * gaps[0] && gaps[1] < 1e-2, "{gaps:?}");
}

/// Elements of Λ²₁₄ annihilated by `x` (the su(3) stabilizing `x`).
fn stabilizer_of(p: &G2Point, x: &[f64; 7]) -> Vec<KForm> {
    let basis = p.lambda14_basis();
    // padded square so the SVD returns a full set of right singular vectors
    let n = basis.len();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i < 7 {
            basis[j].contract(x).unwrap().coeffs()[i]
        } else {
            0.0
        }
    });
    let svd = m.svd(false, true);
    let vt = svd.v_t.unwrap();
    (0..n)
        .filter(|&r| svd.singular_values[r] < 1e-10)
        .map(|r| {
            basis
                .iter()
                .enumerate()
                .fold(KForm::zero(7, 2).unwrap(), |acc, (j, b)| {
                    &acc + &b.scaled(vt[(r, j)])
                })
        })
        .collect()
}

#[test]
fn synthetic_curvatures_split_by_type() {
    let p = G2Point::standard();
    let mut r = sampling::rng(41, 0);
    let seven: Vec<(KForm, KForm)> = (0..7)
        .map(|i| {
            (
                p.rho().contract(&unit(i)).unwrap(),
                sampling::random_form(&mut r, 7, 2),
            )
        })
        .collect();
    let fourteen: Vec<(KForm, KForm)> = p
        .lambda14_basis()
        .iter()
        .map(|a| (a.clone(), sampling::random_form(&mut r, 7, 2)))
        .collect();
    let r7 = Curvature::from_pairs(&seven);
    let r14 = Curvature::from_pairs(&fourteen);
    let f = StructureField::flat(16);
    for (m, x) in points(43, 20) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        let su3 = stabilizer_of(&p, &tp.x);
        assert_eq!(su3.len(), 8);
        let pairs: Vec<(KForm, KForm)> = su3
            .into_iter()
            .map(|a| (a, sampling::random_form(&mut r, 7, 2)))
            .collect();
        let r8 = Curvature::from_pairs(&pairs);
        let a = vertical_obstruction(&p, &r7, &tp.x, &tp.frame, tp.choice.drop).unwrap();
        let b = vertical_obstruction(&p, &r8, &tp.x, &tp.frame, tp.choice.drop).unwrap();
        let c = vertical_obstruction(&p, &r14, &tp.x, &tp.frame, tp.choice.drop).unwrap();
        assert!(a > 1e-2, "{a}");
        assert!(b <= 1e-10, "{b}");
        // the rest of Λ²₁₄ restricts to x⊥ with a (2,0)+(0,2) part
        assert!(c > 1e-2, "{c}");
    }
}

#[test]
fn theta_ignores_vertical_vectors() {
    let lambda = KForm::basis(7, &[1, 4]).unwrap();
    let v = TotVector {
        base: vec![0.0; 7],
        fiber: KForm::basis(7, &[0, 1]).unwrap(),
    };
    let w = TotVector {
        base: unit(4).to_vec(),
        fiber: KForm::zero(7, 2).unwrap(),
    };
    let (theta, _) = tautological_forms(&lambda, &[v, w.clone()], &[w.clone(), w.clone(), w]);
    assert_eq!(theta, 0.0);
}

#[test]
fn xi_is_the_derivative_of_theta_along_sections() {
    use std::f64::consts::PI;
    // λ(p) = Σ sin(2π(c·p)) eᴵ for a few fixed I; s*Θ = λ, so d(s*Θ) = s*Ξ
    let section = |p: &Point| {
        let mut l = KForm::zero(7, 2).unwrap();
        for (t, idx) in [[0usize, 3], [1, 2], [4, 6]].iter().enumerate() {
            let ph = 2.0 * PI * (p[t] + 2.0 * p[t + 3] - p[6 - t]);
            l = l.axpy(ph.sin(), &KForm::basis(7, idx).unwrap()).unwrap();
        }
        l
    };
    let p: Point = [0.2, 0.7, 0.1, 0.45, 0.9, 0.33, 0.6];
    let mut errs = Vec::new();
    for n in [16usize, 32, 64] {
        let h = 1.0 / n as f64;
        let d = exterior_derivative(section, &p, h);
        let mut worst: f64 = 0.0;
        for &mask in g2cr::exterior::multi_indices(7, 3) {
            let idx: Vec<usize> = g2cr::exterior::mask_indices(mask).collect();
            // analytic ∂ᵢλ via a very fine symmetric difference
            let args: Vec<TotVector> = idx
                .iter()
                .map(|&i| {
                    let eps = 1e-5;
                    let fiber = (&section(&shifted(&p, i, eps)) - &section(&shifted(&p, i, -eps)))
                        .scaled(0.5 / eps);
                    TotVector {
                        base: unit(i).to_vec(),
                        fiber,
                    }
                })
                .collect();
            worst = worst.max((tautological_xi(&args) - d.component(&idx)).abs());
        }
        errs.push(worst);
    }
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

fn form_samples(seed: u64, k: usize, count: usize) -> Vec<(Point, KForm)> {
    let mut r = sampling::rng(seed, 7);
    sampling::base_points(seed, count)
        .into_iter()
        .map(|m| (m, sampling::random_form(&mut r, 7, k)))
        .collect()
}

#[test]
fn xi_vanishes_on_flat_horizontal_lifts() {
    let f = StructureField::flat(8);
    for k in [1, 3] {
        assert!(xi_horizontal_check(&f, k, &form_samples(1, k, 5)) <= 1e-13);
    }
}

#[test]
fn second_order_lift_stencil_converges_once_resolved() {
    let samples = form_samples(2, 3, 3);
    let ns = [16, 32, 64];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| xi_horizontal_check_with(&conformal(n), 3, &samples, LiftStencil::Central2))
        .collect();
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn omega_checks_on_flat_field() {
    let f = StructureField::flat(16);
    for (m, x) in points(51, 5) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        let r = step3_omega_check(&f, &tp, f.step());
        assert!(r.d_omega <= 1e-12);
        assert!(r.b_consistency <= 1e-10);
        assert!(step4_cartan_defect(&f, &tp, f.step()) <= 1e-12);
    }
}

#[test]
fn omega_is_not_closed_for_coclosed_failures() {
    let f = StructureField::new(
        Family::ClosedPerturbed {
            epsilon: 0.1,
            frequency: DEFAULT_FREQUENCY,
        },
        16,
    );
    let mut worst: f64 = 0.0;
    for (m, x) in points(53, 5) {
        let tp = twistor_point(&f, &m, &x).unwrap();
        let r = step3_omega_check(&f, &tp, f.step());
        assert!(r.b_consistency <= 1e-10);
        assert!(r.factorization_defect <= 1e-10);
        worst = worst.max(r.d_omega);
    }
    assert!(worst > 1e-3);
}
