//! Regularized space-charge density of the p-n-n+ stack as a function of the
//! dimensionless potential.

use crate::constants::{EXP_DECADE_BOUND, K_B, Q_E};
use crate::error::{Error, Result};
use crate::material::{intrinsic_fermi_energy, MaterialParams};

use super::DiodeDesign;

/// Soft bound a ln(10) tanh(x / (a ln(10))) applied to exponent arguments.
///
/// Identity near the origin, saturating at +-a ln(10) so that `exp` of the
/// result never overflows for `a = 308`.
#[inline]
pub fn sigmoid_regulator(x: f64, a: f64) -> f64 {
    let scale = a * std::f64::consts::LN_10;
    scale * (x / scale).tanh()
}

/// Derivative of [`sigmoid_regulator`] with respect to `x`.
#[inline]
fn sigmoid_regulator_slope(x: f64, a: f64) -> f64 {
    let th = (x / (a * std::f64::consts::LN_10)).tanh();
    1.0 - th * th
}

/// Ionized fraction 1 / (2 e^s + 1) and its derivative with respect to `s`,
/// evaluated without forming e^s when it would overflow.
#[inline]
fn fermi_factor(s: f64) -> (f64, f64) {
    let u = s + std::f64::consts::LN_2;
    let f = if u > 0.0 {
        let e = (-u).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + u.exp())
    };
    (f, -f * (1.0 - f))
}

/// Which doped layer a position belongs to, with weights that split
/// interface nodes evenly between neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LayerWeights {
    pub p: f64,
    pub n: f64,
    pub n_plus: f64,
}

/// Charge model for one design at one temperature, with every
/// design-dependent constant precomputed.
///
/// Densities are in m^-3, positions in m. The returned "charge" is rho / e,
/// i.e. a signed number density.
#[derive(Debug, Clone)]
pub struct ChargeModel {
    /// Regulator bound in decades.
    pub a: f64,
    /// k_B T in eV.
    pub kt_ev: f64,
    /// sqrt(N_c P_v) in m^-3.
    pub sqrt_ncpv: f64,
    /// Intrinsic Fermi energy (eV).
    pub eps_i: f64,
    pub e_g: f64,
    /// Applied bias (V).
    pub v: f64,
    na: f64,
    nn: f64,
    nd: f64,
    /// Layer interfaces in m: -d_l, 0, d, d + d_r.
    z_left: f64,
    z_mid: f64,
    z_right: f64,
    z_tol: f64,
    off_e: f64,
    off_h: f64,
    off_a: f64,
    off_d: f64,
}

/// One evaluation of the charge model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeEval {
    /// rho / e (m^-3).
    pub rho: f64,
    /// d(rho / e) / dPsi (m^-3).
    pub drho: f64,
    /// Free electrons (m^-3).
    pub n: f64,
    /// Free holes (m^-3).
    pub p: f64,
}

impl ChargeModel {
    pub fn new(design: &DiodeDesign, material: &MaterialParams) -> Result<Self> {
        design.validate()?;
        let t = design.t;
        let kt_ev = K_B * t / Q_E;
        let nc = material.n_c_si(t)?;
        let pv = material.p_v_si(t)?;
        let eps_i = intrinsic_fermi_energy(t, material)?;
        let e_g = material.e_g;
        let v = design.v;
        let d_l = design.d_l * 1e-6;
        let d = design.d * 1e-6;
        let d_r = design.d_r * 1e-6;
        Ok(Self {
            a: EXP_DECADE_BOUND,
            kt_ev,
            sqrt_ncpv: (nc * pv).sqrt(),
            eps_i,
            e_g,
            v,
            na: design.n_a * 1e6,
            nn: design.n_n * 1e6,
            nd: design.n_d * 1e6,
            z_left: -d_l,
            z_mid: d,
            z_right: d + d_r,
            z_tol: 1e-9 * (d_l + d + d_r),
            off_e: v / kt_ev,
            off_h: -e_g / kt_ev,
            off_a: (material.eps_a - eps_i - 0.5 * e_g) / kt_ev,
            off_d: (0.5 * e_g - material.eps_d + eps_i + v) / kt_ev,
        })
    }

    /// Domain `[-d_l, d + d_r]` in metres.
    pub fn domain(&self) -> (f64, f64) {
        (self.z_left, self.z_right)
    }

    pub(crate) fn weights(&self, z: f64) -> Result<LayerWeights> {
        let tol = self.z_tol;
        if z < self.z_left - tol || z > self.z_right + tol {
            return Err(Error::Domain {
                what: "position outside the diode (m)",
                value: z,
            });
        }
        let near = |x: f64, y: f64| (x - y).abs() <= tol;
        let w = if near(z, 0.0) {
            LayerWeights { p: 0.5, n: 0.5, n_plus: 0.0 }
        } else if near(z, self.z_mid) {
            LayerWeights { p: 0.0, n: 0.5, n_plus: 0.5 }
        } else if z < 0.0 {
            LayerWeights { p: 1.0, n: 0.0, n_plus: 0.0 }
        } else if z < self.z_mid {
            LayerWeights { p: 0.0, n: 1.0, n_plus: 0.0 }
        } else {
            LayerWeights { p: 0.0, n: 0.0, n_plus: 1.0 }
        };
        Ok(w)
    }

    /// Layer fractions of the control volume `[z - h/2, z + h/2]` clipped to
    /// the domain. Keeps the discrete problem continuous in the layer lengths.
    pub(crate) fn cell_weights(&self, z: f64, h: f64) -> LayerWeights {
        let lo = (z - 0.5 * h).max(self.z_left);
        let hi = (z + 0.5 * h).min(self.z_right);
        let len = hi - lo;
        if len <= 0.0 {
            return self.weights(z.clamp(self.z_left, self.z_right)).unwrap_or(LayerWeights {
                p: 0.0,
                n: 0.0,
                n_plus: 0.0,
            });
        }
        let overlap = |a: f64, b: f64| ((hi.min(b) - lo.max(a)).max(0.0)) / len;
        LayerWeights {
            p: overlap(self.z_left, 0.0),
            n: overlap(0.0, self.z_mid),
            n_plus: overlap(self.z_mid, self.z_right),
        }
    }

    /// Background doping at `z` (m^-3), weighted like the charge terms.
    pub(crate) fn background(&self, w: LayerWeights) -> f64 {
        w.p * self.na + w.n * self.nn + w.n_plus * self.nd
    }

    /// Exponent arguments (electron, hole, acceptor, donor) before
    /// regularization.
    pub fn raw_exponents(&self, psi: f64) -> [f64; 4] {
        [
            psi + self.off_e,
            -psi + self.off_h,
            -psi + self.off_a,
            psi + self.off_d,
        ]
    }

    /// Evaluate the regularized charge at dimensionless potential `psi` with
    /// precomputed layer weights.
    pub(crate) fn eval_weighted(&self, psi: f64, w: LayerWeights) -> ChargeEval {
        let a = self.a;
        let [xe, xh, xa, xd] = self.raw_exponents(psi);

        let se = sigmoid_regulator(xe, a);
        let n = self.sqrt_ncpv * se.exp();
        let dn = n * sigmoid_regulator_slope(xe, a);

        let sh = sigmoid_regulator(xh, a);
        let p = self.sqrt_ncpv * sh.exp();
        // d/dpsi of the hole exponent is -1
        let dp = -p * sigmoid_regulator_slope(xh, a);

        let mut rho = p - n;
        let mut drho = dp - dn;

        if w.p > 0.0 {
            let (f, df) = fermi_factor(sigmoid_regulator(xa, a));
            let slope = -sigmoid_regulator_slope(xa, a);
            rho -= w.p * self.na * f;
            drho -= w.p * self.na * df * slope;
        }
        let donors = w.n * self.nn + w.n_plus * self.nd;
        if donors > 0.0 {
            let (f, df) = fermi_factor(sigmoid_regulator(xd, a));
            let slope = sigmoid_regulator_slope(xd, a);
            rho += donors * f;
            drho += donors * df * slope;
        }
        ChargeEval { rho, drho, n, p }
    }

    /// Regularized rho / e (m^-3) at position `z` (m).
    pub fn eval(&self, psi: f64, z: f64) -> Result<ChargeEval> {
        Ok(self.eval_weighted(psi, self.weights(z)?))
    }

    /// Same density without the regulator, for cross-checks in the regime
    /// where every exponent is representable.
    pub fn eval_unregularized(&self, psi: f64, z: f64) -> Result<f64> {
        let w = self.weights(z)?;
        let [xe, xh, xa, xd] = self.raw_exponents(psi);
        let mut rho = self.sqrt_ncpv * (xh.exp() - xe.exp());
        rho -= w.p * self.na / (2.0 * xa.exp() + 1.0);
        rho += (w.n * self.nn + w.n_plus * self.nd) / (2.0 * xd.exp() + 1.0);
        Ok(rho)
    }

    /// Converts a dimensionless potential to the electrostatic potential
    /// given the left quasi-Fermi level (eV): phi = (kT psi - mu_l + eps_i + E_g/2) / e.
    pub fn phi_from_psi(&self, psi: f64, mu_l: f64) -> f64 {
        self.kt_ev * psi - mu_l + self.eps_i + 0.5 * self.e_g
    }

    pub fn psi_from_phi(&self, phi: f64, mu_l: f64) -> f64 {
        (phi + mu_l - self.eps_i - 0.5 * self.e_g) / self.kt_ev
    }
}

/// Space-charge density rho(z, Psi) in C/cm^3 for a position `z` in um.
pub fn charge_density(
    psi: f64,
    z: f64,
    design: &DiodeDesign,
    material: &MaterialParams,
) -> Result<f64> {
    let model = ChargeModel::new(design, material)?;
    let ev = model.eval(psi, z * 1e-6)?;
    Ok(Q_E * ev.rho * 1e-6)
}
