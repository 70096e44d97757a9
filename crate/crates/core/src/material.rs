//! Material parameterization and equilibrium carrier statistics.
//!
//! Energies are in eV, measured from an arbitrary common reference (the
//! 4H-SiC defaults put the valence band edge at 0). Densities returned by
//! the public functions are in cm^-3; the `*_si` variants return m^-3.

use serde::{Deserialize, Serialize};

use crate::constants::{EPS0_CODATA, EPS0_PRINTED, HBAR, K_B, M_E, Q_E};
use crate::error::{ensure_positive, Error, Result};

/// Which value of the vacuum permittivity to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VacuumPermittivity {
    /// CODATA value, 8.854e-12 F/m.
    #[default]
    Codata,
    /// 8.99e-12 F/m, the value printed alongside the original 4H-SiC results.
    Printed,
}

impl VacuumPermittivity {
    pub fn value(self) -> f64 {
        match self {
            Self::Codata => EPS0_CODATA,
            Self::Printed => EPS0_PRINTED,
        }
    }
}

/// Caughey-Thomas style low-field mobility fit plus velocity saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityFit {
    /// Lower mobility bound (cm^2/V s).
    pub mu_min: f64,
    /// Upper mobility bound (cm^2/V s).
    pub mu_max: f64,
    /// Reference doping (cm^-3).
    pub n_ref: f64,
    pub alpha_fit: f64,
    /// Saturation velocity (cm/s).
    pub v_sat: f64,
    /// Abruptness of the linear-to-saturated transition.
    pub beta_fit: f64,
}

impl Default for MobilityFit {
    /// Electrons perpendicular to the c-axis in 4H-SiC at 300 K.
    fn default() -> Self {
        Self {
            mu_min: 40.0,
            mu_max: 950.0,
            n_ref: 2e17,
            alpha_fit: 0.76,
            v_sat: 2.4e7,
            beta_fit: 0.85,
        }
    }
}

/// Deep-level trap population responsible for generation current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapParams {
    /// Trap density (cm^-3).
    pub n_t: f64,
    /// Electron capture cross-section (cm^2).
    pub sigma_n: f64,
    /// Hole capture cross-section (cm^2).
    pub sigma_p: f64,
    /// Zero-field trap level (eV).
    pub eps_t0: f64,
    /// Depth of the trap-bearing surface layer (nm).
    pub d_depth: f64,
    /// FWHM of the half-Gaussian depth profile (nm).
    pub fwhm: f64,
}

impl Default for TrapParams {
    fn default() -> Self {
        Self {
            n_t: 1e17,
            sigma_n: 1e-15,
            sigma_p: 1e-15,
            // midgap of the default 4H-SiC band structure
            eps_t0: 1.63,
            d_depth: 5.0,
            fwhm: 5.0,
        }
    }
}

/// Semiconductor constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Relative permittivity.
    pub kappa: f64,
    /// Band gap (eV); must equal `eps_c - eps_v`.
    pub e_g: f64,
    /// Conduction band edge (eV).
    pub eps_c: f64,
    /// Valence band edge (eV).
    pub eps_v: f64,
    /// Acceptor level (eV).
    pub eps_a: f64,
    /// Donor level (eV).
    pub eps_d: f64,
    /// Conduction-band density-of-states mass (units of m_e).
    pub m_c: f64,
    /// Valence-band density-of-states mass (units of m_e).
    pub m_v: f64,
    /// Tunneling / thermal-velocity effective mass (units of m_e).
    pub m_star: f64,
    /// Breakdown field (V/cm).
    pub e_bd: f64,
    /// Lattice constant (nm).
    pub lattice_const: f64,
    #[serde(default)]
    pub mobility: MobilityFit,
    #[serde(default)]
    pub trap: TrapParams,
    #[serde(default)]
    pub vacuum_permittivity: VacuumPermittivity,
}

impl Default for MaterialParams {
    /// 4H-SiC. The dopant levels (Al acceptor 0.20 eV above the valence
    /// band, N donor 0.07 eV below the conduction band) and the
    /// density-of-states masses are literature values for 4H-SiC.
    fn default() -> Self {
        Self {
            kappa: 9.66,
            e_g: 3.26,
            eps_c: 3.26,
            eps_v: 0.0,
            eps_a: 0.20,
            eps_d: 3.19,
            m_c: 0.77,
            m_v: 1.0,
            m_star: 0.37,
            e_bd: 1.9e6,
            lattice_const: 0.1,
            mobility: MobilityFit::default(),
            trap: TrapParams::default(),
            vacuum_permittivity: VacuumPermittivity::Codata,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("kappa", self.kappa)?;
        ensure_positive("band gap", self.e_g)?;
        if (self.e_g - (self.eps_c - self.eps_v)).abs() > 1e-9 * self.e_g.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "band gap {} eV differs from eps_c - eps_v = {} eV",
                self.e_g,
                self.eps_c - self.eps_v
            )));
        }
        if !(self.eps_v < self.eps_a && self.eps_a < self.eps_d && self.eps_d < self.eps_c) {
            return Err(Error::InvalidParameter(
                "energy levels must satisfy eps_v < eps_a < eps_d < eps_c".into(),
            ));
        }
        ensure_positive("m_c", self.m_c)?;
        ensure_positive("m_v", self.m_v)?;
        ensure_positive("m_star", self.m_star)?;
        ensure_positive("breakdown field", self.e_bd)?;
        ensure_positive("lattice constant", self.lattice_const)?;

        let mob = &self.mobility;
        ensure_positive("mu_min", mob.mu_min)?;
        if mob.mu_max < mob.mu_min {
            return Err(Error::InvalidParameter("mu_max must be >= mu_min".into()));
        }
        ensure_positive("N_ref", mob.n_ref)?;
        ensure_positive("v_sat", mob.v_sat)?;
        ensure_positive("beta_fit", mob.beta_fit)?;

        let trap = &self.trap;
        if !(trap.n_t >= 0.0) {
            return Err(Error::Domain {
                what: "trap density",
                value: trap.n_t,
            });
        }
        ensure_positive("sigma_n", trap.sigma_n)?;
        ensure_positive("sigma_p", trap.sigma_p)?;
        if !(self.eps_v < trap.eps_t0 && trap.eps_t0 < self.eps_c) {
            return Err(Error::InvalidParameter(
                "trap level must lie inside the gap".into(),
            ));
        }
        ensure_positive("trap FWHM", trap.fwhm)?;
        if trap.d_depth < trap.fwhm {
            return Err(Error::InvalidParameter(
                "trap layer depth must be >= its FWHM".into(),
            ));
        }
        Ok(())
    }

    /// Absolute permittivity (F/m).
    pub fn permittivity(&self) -> f64 {
        self.kappa * self.vacuum_permittivity.value()
    }

    pub fn midgap(&self) -> f64 {
        0.5 * (self.eps_c + self.eps_v)
    }

    pub fn n_c_si(&self, t: f64) -> Result<f64> {
        effective_dos_si(t, self.m_c)
    }

    pub fn p_v_si(&self, t: f64) -> Result<f64> {
        effective_dos_si(t, self.m_v)
    }
}

/// Stark susceptibility giving 11.1 MHz for a defect 0.85 um into the
/// baseline diode at -5 V (Hz per V/cm).
pub const DEFAULT_MU_Z: f64 = 9.5311e5;

/// Optically addressable spin center embedded in the light n-layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinCenterParams {
    /// Stark susceptibility (Hz per V/cm).
    pub mu_z: f64,
    pub g_eff: f64,
    /// Position along the growth axis (um).
    pub z_def: f64,
    /// Depth below the surface (nm).
    pub x_def: f64,
    /// Dipole orientation with respect to z (rad); `None` averages over
    /// the sphere.
    pub theta: Option<f64>,
    /// Surface dipole variance p_d^2 in (e nm)^2.
    pub dipole_var: f64,
    /// Carrier scattering time (s); `None` derives it from the low-field
    /// mobility.
    pub tau_e: Option<f64>,
}

impl Default for SpinCenterParams {
    fn default() -> Self {
        Self {
            mu_z: DEFAULT_MU_Z,
            g_eff: 2.0,
            z_def: 0.85,
            x_def: 15.0,
            theta: None,
            // one lattice constant of charge displacement
            dipole_var: 0.01,
            tau_e: None,
        }
    }
}

impl SpinCenterParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("mu_z", self.mu_z)?;
        ensure_positive("g_eff", self.g_eff)?;
        if let Some(theta) = self.theta {
            if !(0.0..=std::f64::consts::PI).contains(&theta) {
                return Err(Error::Domain {
                    what: "dipole angle theta outside [0, pi]",
                    value: theta,
                });
            }
        }
        if !(self.dipole_var >= 0.0 && self.dipole_var.is_finite()) {
            return Err(Error::Domain {
                what: "dipole variance",
                value: self.dipole_var,
            });
        }
        if let Some(tau) = self.tau_e {
            ensure_positive("tau_e", tau)?;
        }
        Ok(())
    }
}

/// Effective density of states (1/4)(2 m k_B T / (pi hbar^2))^{3/2}, in m^-3.
pub fn effective_dos_si(t: f64, m: f64) -> Result<f64> {
    ensure_positive("temperature", t)?;
    ensure_positive("effective mass", m)?;
    let base = 2.0 * m * M_E * K_B * t / (std::f64::consts::PI * HBAR * HBAR);
    Ok(0.25 * base.powf(1.5))
}

/// Effective density of states in cm^-3 for temperature `t` (K) and mass
/// `m` (units of m_e).
pub fn effective_dos(t: f64, m: f64) -> Result<f64> {
    Ok(effective_dos_si(t, m)? * 1e-6)
}

/// Intrinsic density together with a flag telling whether the exponential
/// underflowed to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrinsicDensity {
    /// cm^-3
    pub value: f64,
    pub underflow: bool,
}

/// Natural log of the intrinsic density in m^-3.
pub fn ln_intrinsic_density_si(t: f64, e_g: f64, m_c: f64, m_v: f64) -> Result<f64> {
    ensure_positive("temperature", t)?;
    if !(e_g >= 0.0) {
        return Err(Error::Domain {
            what: "band gap",
            value: e_g,
        });
    }
    let nc = effective_dos_si(t, m_c)?;
    let pv = effective_dos_si(t, m_v)?;
    Ok(0.5 * (nc.ln() + pv.ln()) - e_g * Q_E / (2.0 * K_B * t))
}

/// n_i = sqrt(N_c P_v) exp(-E_g / 2 k_B T), in cm^-3.
///
/// Evaluated in the log domain; a result below the smallest positive double
/// is reported as zero with `underflow` set.
pub fn intrinsic_carrier_density(t: f64, e_g: f64, m_c: f64, m_v: f64) -> Result<IntrinsicDensity> {
    let ln_si = ln_intrinsic_density_si(t, e_g, m_c, m_v)?;
    let ln_cm = ln_si - 6.0 * std::f64::consts::LN_10;
    let value = ln_cm.exp();
    Ok(IntrinsicDensity {
        value,
        underflow: value == 0.0 || !value.is_normal(),
    })
}

/// Intrinsic Fermi energy (eV): midgap plus (k_B T / 2) ln(P_v / N_c).
pub fn intrinsic_fermi_energy(t: f64, material: &MaterialParams) -> Result<f64> {
    ensure_positive("temperature", t)?;
    ensure_positive("m_c", material.m_c)?;
    ensure_positive("m_v", material.m_v)?;
    let kt_ev = K_B * t / Q_E;
    // P_v / N_c = (m_v / m_c)^{3/2}
    Ok(material.midgap() + 0.5 * kt_ev * 1.5 * (material.m_v / material.m_c).ln())
}
