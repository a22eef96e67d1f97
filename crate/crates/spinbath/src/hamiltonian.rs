//! Time-dependent secular Hamiltonian for one crystallite orientation under
//! magic-angle spinning.
//!
//! The Hamiltonian splits into
//!
//! * single-spin z terms `Δω_j(t)·S_jz` from the chemical-shift tensors,
//! * like-pair terms `A_ij(t)·(S_ix S_jx + S_iy S_jy − 2 S_iz S_jz)` between
//!   spins of the same species, and
//! * unlike-pair terms `−2 A_ij(t)·S_iz S_jz` between different species,
//!
//! with `A_ij(t) = (μ₀/4π)·γ_i γ_j ħ (1 − 3cos²θ_ij(t)) / r³_ij` in rad/s.
//!
//! Frame composition: a crystal-frame vector u is taken to the rotor frame by
//! the crystallite orientation R, spun about the rotor z-axis by φ = 2πν_r t,
//! and the rotor axis is tilted from the field by the magic angle θ_m, so
//!
//! ```text
//! cos θ(t) = cos θ_m · u_z − sin θ_m · (u_x cos φ − u_y sin φ),  u = R·û_crystal
//! ```
//!
//! Every coefficient is periodic with the rotor period T_r. Methyl/ammonium
//! jump averaging replaces each coefficient involving a grouped spin by the
//! mean over the triple's site placements (cyclic within a group, independent
//! across groups), so a term carries up to nine weighted geometry legs.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::constants::{self, DEFAULT_ROTOR_FREQUENCY_HZ};
use crate::error::{Error, Result};
use crate::structure::{Site, SpinSystem};

/// Crystallite orientation: rotation taking the crystal frame to the rotor
/// frame.
#[derive(Debug, Clone, Copy)]
pub struct Orientation(pub UnitQuaternion<f64>);

impl Orientation {
    #[must_use]
    pub fn identity() -> Self {
        Orientation(UnitQuaternion::identity())
    }

    #[must_use]
    pub fn matrix(&self) -> Rotation3<f64> {
        self.0.to_rotation_matrix()
    }
}

/// Magic-angle spinning parameters.
#[derive(Debug, Clone, Copy)]
pub struct MasConfig {
    pub rotor_frequency_hz: f64,
    pub rotor_angle_rad: f64,
}

impl Default for MasConfig {
    fn default() -> Self {
        MasConfig {
            rotor_frequency_hz: DEFAULT_ROTOR_FREQUENCY_HZ,
            rotor_angle_rad: constants::magic_angle(),
        }
    }
}

impl MasConfig {
    #[must_use]
    pub fn rotor_period(&self) -> f64 {
        1.0 / self.rotor_frequency_hz
    }
}

/// Trigonometric state of the rotor at one instant, shared by all terms.
#[derive(Debug, Clone, Copy)]
pub struct RotorPhase {
    cos_phi: f64,
    sin_phi: f64,
    sin_tilt: f64,
    cos_tilt: f64,
    /// Lab z-axis expressed in the rotor frame.
    n: Vector3<f64>,
}

impl RotorPhase {
    /// Cosine of the angle between a rotor-frame vector and the field axis.
    #[inline]
    #[must_use]
    pub fn project_field_axis(&self, u: &Vector3<f64>) -> f64 {
        self.n.dot(u)
    }
}

impl MasConfig {
    #[must_use]
    pub fn phase_at(&self, t: f64) -> RotorPhase {
        let (sin_phi, cos_phi) = (2.0 * std::f64::consts::PI * self.rotor_frequency_hz * t).sin_cos();
        let (sin_tilt, cos_tilt) = self.rotor_angle_rad.sin_cos();
        RotorPhase {
            cos_phi,
            sin_phi,
            sin_tilt,
            cos_tilt,
            n: Vector3::new(-sin_tilt * cos_phi, sin_tilt * sin_phi, cos_tilt),
        }
    }
}

/// One weighted placement of an internuclear vector: `weight` carries the
/// jump-average fraction times the distance prefactor (rad/s), `u` is the
/// rotor-frame unit vector.
#[derive(Debug, Clone, Copy)]
struct GeometryLeg {
    weight: f64,
    u: Vector3<f64>,
}

impl GeometryLeg {
    #[inline]
    fn coupling(&self, ph: &RotorPhase) -> f64 {
        let c = ph.cos_tilt * self.u.z - ph.sin_tilt * (self.u.x * ph.cos_phi - self.u.y * ph.sin_phi);
        self.weight * (1.0 - 3.0 * c * c)
    }
}

/// Dipolar pair term; `site_i`/`site_j` index into the system's site list.
#[derive(Debug, Clone)]
pub struct PairTerm {
    pub site_i: usize,
    pub site_j: usize,
    legs: Vec<GeometryLeg>,
    /// Jump-averaged coupling magnitude scale, used for sweep ordering.
    pub strength: f64,
}

impl PairTerm {
    /// A_ij at time `t` (rad/s), jump-averaged.
    #[inline]
    #[must_use]
    pub fn coupling(&self, ph: &RotorPhase) -> f64 {
        self.legs.iter().map(|l| l.coupling(ph)).sum()
    }
}

/// Chemical-shift term for one site: rotor-frame tensor in rad/s.
#[derive(Debug, Clone)]
pub struct ShiftTerm {
    pub site: usize,
    tensor: Matrix3<f64>,
}

impl ShiftTerm {
    /// Δω_jz at time `t` (rad/s): the lab-frame zz component of the tensor.
    #[inline]
    #[must_use]
    pub fn shift(&self, ph: &RotorPhase) -> f64 {
        (self.tensor * ph.n).dot(&ph.n)
    }
}

/// Term list of the secular Hamiltonian for one crystallite orientation.
#[derive(Debug, Clone)]
pub struct LabHamiltonian {
    pub z_terms: Vec<ShiftTerm>,
    /// Same-species pairs (flip-flop retained), strongest first.
    pub like_pairs: Vec<PairTerm>,
    /// Cross-species pairs (Ising part only).
    pub unlike_pairs: Vec<PairTerm>,
    pub mas: MasConfig,
}

/// Hamiltonian assembly options.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Average coefficients over methyl/ammonium jump placements.
    pub group_average: bool,
    /// Pair terms with averaged magnitude below this are dropped (rad/s).
    pub coupling_cutoff: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            group_average: true,
            coupling_cutoff: 2.0 * std::f64::consts::PI * 1.0,
        }
    }
}

/// Site placements contributing to jump averaging: the member positions of
/// the site's group (id-ordered), or just the site itself.
fn placements(system: &SpinSystem, site: &Site) -> Vec<Vector3<f64>> {
    match site.group_id {
        Some(g) => {
            let mut members: Vec<&Site> = system
                .sites
                .iter()
                .filter(|s| s.group_id == Some(g))
                .collect();
            members.sort_by_key(|s| s.id);
            members.iter().map(|s| s.position).collect()
        }
        None => vec![site.position],
    }
}

fn pair_legs(
    system: &SpinSystem,
    a: &Site,
    b: &Site,
    orientation: &Orientation,
    group_average: bool,
) -> Vec<GeometryLeg> {
    let rot = orientation.matrix();
    let gamma_scale =
        constants::MU0_OVER_4PI * a.species.gamma() * b.species.gamma() * constants::HBAR;
    let leg = |pa: Vector3<f64>, pb: Vector3<f64>, weight: f64| {
        let d = pb - pa;
        let r_m = d.norm() * 1e-10;
        GeometryLeg {
            weight: weight * gamma_scale / (r_m * r_m * r_m),
            u: rot * d.normalize(),
        }
    };

    if !group_average {
        return vec![leg(a.position, b.position, 1.0)];
    }
    match (a.group_id, b.group_id) {
        // One cyclic jump moves both spins of an intra-group pair together.
        (Some(ga), Some(gb)) if ga == gb => {
            let pos = placements(system, a);
            let members: Vec<u32> = {
                let mut m: Vec<u32> = system
                    .sites
                    .iter()
                    .filter(|s| s.group_id == Some(ga))
                    .map(|s| s.id)
                    .collect();
                m.sort_unstable();
                m
            };
            let ia = members.iter().position(|&id| id == a.id).expect("member");
            let ib = members.iter().position(|&id| id == b.id).expect("member");
            (0..3)
                .map(|k| leg(pos[(ia + k) % 3], pos[(ib + k) % 3], 1.0 / 3.0))
                .collect()
        }
        // Independent jumps: average over all placement combinations.
        _ => {
            let pa = placements(system, a);
            let pb = placements(system, b);
            let w = 1.0 / (pa.len() * pb.len()) as f64;
            pa.iter()
                .flat_map(|&x| pb.iter().map(move |&y| leg(x, y, w)))
                .collect()
        }
    }
}

fn shift_tensor_rotor(
    system: &SpinSystem,
    site: &Site,
    orientation: &Orientation,
    group_average: bool,
) -> Matrix3<f64> {
    let mut tensor = site.shift_tensor;
    if group_average {
        if let Some(g) = site.group_id {
            let members: Vec<&Site> = system
                .sites
                .iter()
                .filter(|s| s.group_id == Some(g))
                .collect();
            tensor = members
                .iter()
                .fold(Matrix3::zeros(), |acc, s| acc + s.shift_tensor)
                / members.len() as f64;
        }
    }
    let r = orientation.matrix();
    let rotated = r.matrix() * tensor * r.matrix().transpose();
    rotated * (2.0 * std::f64::consts::PI)
}

/// Assemble the term list for one crystallite orientation.
#[must_use]
pub fn build_hamiltonian(
    system: &SpinSystem,
    orientation: &Orientation,
    mas: MasConfig,
    options: BuildOptions,
) -> LabHamiltonian {
    let z_terms = system
        .sites
        .iter()
        .enumerate()
        .map(|(idx, s)| ShiftTerm {
            site: idx,
            tensor: shift_tensor_rotor(system, s, orientation, options.group_average),
        })
        .collect();

    let mut like_pairs = Vec::new();
    let mut unlike_pairs = Vec::new();
    for i in 0..system.sites.len() {
        for j in (i + 1)..system.sites.len() {
            let (a, b) = (&system.sites[i], &system.sites[j]);
            let legs = pair_legs(system, a, b, orientation, options.group_average);
            let strength: f64 = legs.iter().map(|l| l.weight).sum();
            if strength.abs() < options.coupling_cutoff {
                continue;
            }
            let term = PairTerm { site_i: i, site_j: j, legs, strength };
            if a.species == b.species {
                like_pairs.push(term);
            } else {
                unlike_pairs.push(term);
            }
        }
    }
    // Strongest-first sweep order; index tie-break keeps builds deterministic.
    like_pairs.sort_by(|a, b| {
        b.strength
            .total_cmp(&a.strength)
            .then(a.site_i.cmp(&b.site_i))
            .then(a.site_j.cmp(&b.site_j))
    });
    unlike_pairs.sort_by(|a, b| a.site_i.cmp(&b.site_i).then(a.site_j.cmp(&b.site_j)));

    LabHamiltonian { z_terms, like_pairs, unlike_pairs, mas }
}

/// Weighted internuclear geometry of a pair in the crystal frame: each leg is
/// `(jump weight × distance prefactor in rad/s, unit vector)`, so the coupling
/// at any instant is `Σ c_k (1 − 3 cos²θ_k(t))`.
pub fn pair_geometry(
    system: &SpinSystem,
    site_i: u32,
    site_j: u32,
    group_average: bool,
) -> Result<Vec<(f64, Vector3<f64>)>> {
    if site_i == site_j {
        return Err(Error::Config(format!("pair geometry of site {site_i} with itself")));
    }
    let a = system
        .site_by_id(site_i)
        .ok_or_else(|| Error::Config(format!("site {site_i} not found")))?;
    let b = system
        .site_by_id(site_j)
        .ok_or_else(|| Error::Config(format!("site {site_j} not found")))?;
    let legs = pair_legs(system, a, b, &Orientation::identity(), group_average);
    Ok(legs.into_iter().map(|l| (l.weight, l.u)).collect())
}

/// Jump-averaged dipolar coupling A_ij(t) between two sites, rad/s.
pub fn dipolar_coupling(
    system: &SpinSystem,
    site_i: u32,
    site_j: u32,
    orientation: &Orientation,
    t: f64,
    mas: MasConfig,
) -> Result<f64> {
    if site_i == site_j {
        return Err(Error::Config(format!("dipolar coupling of site {site_i} with itself")));
    }
    let a = system
        .site_by_id(site_i)
        .ok_or_else(|| Error::Config(format!("site {site_i} not found")))?;
    let b = system
        .site_by_id(site_j)
        .ok_or_else(|| Error::Config(format!("site {site_j} not found")))?;
    let legs = pair_legs(system, a, b, orientation, true);
    let ph = mas.phase_at(t);
    Ok(legs.iter().map(|l| l.coupling(&ph)).sum())
}

/// Chemical-shift coefficient Δω_jz(t) for one site, rad/s.
pub fn chemical_shift(
    system: &SpinSystem,
    site: u32,
    orientation: &Orientation,
    t: f64,
    mas: MasConfig,
) -> Result<f64> {
    let s = system
        .site_by_id(site)
        .ok_or_else(|| Error::Config(format!("site {site} not found")))?;
    let term = ShiftTerm {
        site: 0,
        tensor: shift_tensor_rotor(system, s, orientation, true),
    };
    Ok(term.shift(&mas.phase_at(t)))
}
