#![allow(dead_code)]
//! Closed-form oracles shared by the integration tests.

use g2cr::field::{Christoffel, Curvature, Point, StructureField};

/// Least-squares slope of `log err` against `log h`.
pub fn slope(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// `Γᵏᵢⱼ = δᵏᵢ ∂ⱼf + δᵏⱼ ∂ᵢf − δᵢⱼ ∂ₖf` for `g = e^{2f} δ`.
pub fn conformal_christoffel(field: &StructureField, p: &Point) -> Christoffel {
    let df = field.conformal_gradient(p);
    let mut g = [[[0.0; 7]; 7]; 7];
    for k in 0..7 {
        for i in 0..7 {
            for j in 0..7 {
                let mut v = 0.0;
                if k == i {
                    v += df[j];
                }
                if k == j {
                    v += df[i];
                }
                if i == j {
                    v -= df[k];
                }
                g[k][i][j] = v;
            }
        }
    }
    g
}

/// `∂ₘΓᵏᵢⱼ`; only m = 0 is non-zero since f depends on p₁ alone
pub fn conformal_christoffel_derivative(
    field: &StructureField,
    p: &Point,
    m: usize,
) -> Christoffel {
    let mut d = [[[0.0; 7]; 7]; 7];
    if m != 0 {
        return d;
    }
    let f11 = field.conformal_second_derivative(p);
    for k in 0..7 {
        for i in 0..7 {
            for j in 0..7 {
                let mut v = 0.0;
                if k == i && j == 0 {
                    v += f11;
                }
                if k == j && i == 0 {
                    v += f11;
                }
                if i == j && k == 0 {
                    v -= f11;
                }
                d[k][i][j] = v;
            }
        }
    }
    d
}

pub fn conformal_curvature(field: &StructureField, p: &Point) -> Curvature {
    let gam = conformal_christoffel(field, p);
    let dg: Vec<Christoffel> = (0..7)
        .map(|m| conformal_christoffel_derivative(field, p, m))
        .collect();
    let scale = (2.0 * field.conformal_factor(p)).exp();
    let mut r = Curvature::zero();
    for mu in 0..7 {
        for nu in 0..7 {
            for s in 0..7 {
                for rho in 0..7 {
                    let mut v = dg[mu][rho][nu][s] - dg[nu][rho][mu][s];
                    for l in 0..7 {
                        v += gam[rho][mu][l] * gam[l][nu][s] - gam[rho][nu][l] * gam[l][mu][s];
                    }
                    r.set(mu, nu, s, rho, scale * v);
                }
            }
        }
    }
    r
}
