//! Spin-system description: site coordinates, species, chemical-shift
//! tensors, and methyl/ammonium jump groups, with distance-based bath
//! ordering and truncation.
//!
//! The on-disk format is a JSON document:
//!
//! ```json
//! {
//!   "b0_proton_larmor_hz": 4.0e8,
//!   "sites": [
//!     { "id": 0, "species": "C13", "xyz_angstrom": [0.0, 0.0, 0.0],
//!       "shift_tensor_hz": [100.0, 0.0, 0.0, 100.0, 0.0, 100.0],
//!       "group_id": null, "molecule_id": 0 }
//!   ]
//! }
//! ```
//!
//! `shift_tensor_hz` lists the upper triangle of the symmetric tensor in row
//! order `[xx, xy, xz, yy, yz, zz]`, in Hz at the stated field, as deviations
//! from the species reference frequency. Unknown fields are rejected.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::{GAMMA_C, GAMMA_H, GAMMA_N};
use crate::error::{Error, Result};

/// Maximum total spin count accepted by default (state vectors are 2ⁿ).
pub const DEFAULT_MAX_SITES: usize = 24;

/// Minimum physical separation between two point nuclei, Å.
pub const MIN_SITE_SEPARATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    C13,
    N15,
    H1,
}

impl Species {
    /// Gyromagnetic ratio in rad s⁻¹ T⁻¹.
    #[must_use]
    pub fn gamma(self) -> f64 {
        match self {
            Species::C13 => GAMMA_C,
            Species::N15 => GAMMA_N,
            Species::H1 => GAMMA_H,
        }
    }

    #[must_use]
    pub fn symbol(self) -> &'static str {
        match self {
            Species::C13 => "C",
            Species::N15 => "N",
            Species::H1 => "H",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Site {
    pub id: u32,
    pub species: Species,
    /// Position in the crystal frame, Å.
    pub position: Vector3<f64>,
    /// Symmetric shift tensor in the crystal frame, Hz (deviation from the
    /// species reference frequency).
    pub shift_tensor: Matrix3<f64>,
    /// Methyl/ammonium jump-group label; the three sites of a group exchange
    /// rapidly and are averaged in the Hamiltonian.
    pub group_id: Option<u32>,
    pub molecule_id: u32,
}

/// Whether bath truncation adds grouped protons as whole triples (the
/// default, matching fast methyl/ammonium exchange) or strictly one by one
/// (used for the local-field sweep).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inclusion {
    #[default]
    WholeGroups,
    OneByOne,
}

#[derive(Debug, Clone)]
pub struct SpinSystem {
    pub sites: Vec<Site>,
    /// Static field in Tesla, fixed by the proton Larmor frequency.
    pub b0: f64,
    /// Site id of the initially polarized carbon.
    pub reference_site: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureFile {
    b0_proton_larmor_hz: f64,
    sites: Vec<SiteRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteRecord {
    id: u32,
    species: Species,
    xyz_angstrom: [f64; 3],
    /// Upper triangle [xx, xy, xz, yy, yz, zz], Hz.
    shift_tensor_hz: [f64; 6],
    #[serde(default)]
    group_id: Option<u32>,
    molecule_id: u32,
}

impl SpinSystem {
    /// Load and validate a structure file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_capped(path, DEFAULT_MAX_SITES)
    }

    /// Load with an explicit site-count cap.
    pub fn load_capped(path: impl AsRef<Path>, max_sites: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text, max_sites)
            .map_err(|e| match e {
                Error::Parse { detail, .. } => Error::Parse {
                    path: path.display().to_string(),
                    detail,
                },
                other => other,
            })
    }

    /// Parse and validate from JSON text.
    pub fn from_json(text: &str, max_sites: usize) -> Result<Self> {
        let file: StructureFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: String::new(),
            detail: e.to_string(),
        })?;
        Self::from_records(file, max_sites)
    }

    fn from_records(file: StructureFile, max_sites: usize) -> Result<Self> {
        if !(file.b0_proton_larmor_hz.is_finite() && file.b0_proton_larmor_hz > 0.0) {
            return Err(Error::Config(format!(
                "b0_proton_larmor_hz must be positive, got {}",
                file.b0_proton_larmor_hz
            )));
        }
        if file.sites.len() > max_sites {
            return Err(Error::ResourceCap(format!(
                "{} sites exceeds the configured maximum of {max_sites}",
                file.sites.len()
            )));
        }

        let mut sites = Vec::with_capacity(file.sites.len());
        for rec in &file.sites {
            let t = &rec.shift_tensor_hz;
            for v in rec.xyz_angstrom.iter().chain(t.iter()) {
                if !v.is_finite() {
                    return Err(Error::Structure {
                        site_id: i64::from(rec.id),
                        detail: "non-finite coordinate or tensor entry".into(),
                    });
                }
            }
            sites.push(Site {
                id: rec.id,
                species: rec.species,
                position: Vector3::new(rec.xyz_angstrom[0], rec.xyz_angstrom[1], rec.xyz_angstrom[2]),
                shift_tensor: Matrix3::new(
                    t[0], t[1], t[2],
                    t[1], t[3], t[4],
                    t[2], t[4], t[5],
                ),
                group_id: rec.group_id,
                molecule_id: rec.molecule_id,
            });
        }

        // B₀ from the proton Larmor frequency.
        let b0 = 2.0 * std::f64::consts::PI * file.b0_proton_larmor_hz / GAMMA_H;
        let reference_site = sites
            .iter()
            .find(|s| s.species == Species::C13)
            .map(|s| s.id)
            .unwrap_or_else(|| sites.first().map_or(0, |s| s.id));

        let system = SpinSystem { sites, b0, reference_site };
        system.validate()?;
        Ok(system)
    }

    /// Structural invariants: unique ids, minimum separations, jump groups of
    /// exactly three same-species sites.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for s in &self.sites {
            if let Some(_prev) = seen.insert(s.id, ()) {
                return Err(Error::Structure {
                    site_id: i64::from(s.id),
                    detail: "duplicate site id".into(),
                });
            }
        }
        for (a, b) in self.site_pairs() {
            let d = (a.position - b.position).norm();
            if d < MIN_SITE_SEPARATION {
                return Err(Error::Structure {
                    site_id: i64::from(a.id),
                    detail: format!("sites {} and {} are only {d:.3} Å apart", a.id, b.id),
                });
            }
        }
        let mut groups: HashMap<u32, Vec<&Site>> = HashMap::new();
        for s in &self.sites {
            if let Some(g) = s.group_id {
                groups.entry(g).or_default().push(s);
            }
        }
        for (g, members) in &groups {
            if members.len() != 3 {
                return Err(Error::Structure {
                    site_id: i64::from(members[0].id),
                    detail: format!("jump group {g} has {} members, expected 3", members.len()),
                });
            }
            if members.iter().any(|m| m.species != members[0].species) {
                return Err(Error::Structure {
                    site_id: i64::from(members[0].id),
                    detail: format!("jump group {g} mixes species"),
                });
            }
        }
        Ok(())
    }

    fn site_pairs(&self) -> impl Iterator<Item = (&Site, &Site)> {
        self.sites.iter().enumerate().flat_map(move |(i, a)| {
            self.sites[i + 1..].iter().map(move |b| (a, b))
        })
    }

    #[must_use]
    pub fn site_by_id(&self, id: u32) -> Option<&Site> {
        self.sites.iter().find(|s| s.id == id)
    }

    #[must_use]
    pub fn proton_count(&self) -> usize {
        self.sites.iter().filter(|s| s.species == Species::H1).count()
    }

    #[must_use]
    pub fn carbon_ids(&self) -> Vec<u32> {
        self.sites
            .iter()
            .filter(|s| s.species == Species::C13)
            .map(|s| s.id)
            .collect()
    }

    /// Proton site ids ordered for bath inclusion: protons of the reference
    /// molecule first, then external protons, each segment sorted by distance
    /// to the reference site. With [`Inclusion::WholeGroups`], a jump triple
    /// moves as one contiguous block keyed by its centroid distance.
    ///
    /// Distances increase monotonically within each segment (per block key);
    /// an external proton may still be nearer than the farthest
    /// intra-molecular one — molecule membership takes precedence, matching
    /// the convention that the molecule's own protons are counted first.
    pub fn bath_order(&self, reference: u32, inclusion: Inclusion) -> Result<Vec<u32>> {
        let ref_site = self.site_by_id(reference).ok_or_else(|| {
            Error::Config(format!("reference site {reference} not found"))
        })?;
        let ref_pos = ref_site.position;
        let ref_mol = ref_site.molecule_id;

        // Block key: grouped protons share their centroid distance so the
        // triple stays contiguous; lone protons use their own distance.
        let mut centroid_dist: HashMap<u32, f64> = HashMap::new();
        if inclusion == Inclusion::WholeGroups {
            let mut acc: HashMap<u32, (Vector3<f64>, usize)> = HashMap::new();
            for s in self.sites.iter().filter(|s| s.species == Species::H1) {
                if let Some(g) = s.group_id {
                    let e = acc.entry(g).or_insert((Vector3::zeros(), 0));
                    e.0 += s.position;
                    e.1 += 1;
                }
            }
            for (g, (sum, n)) in acc {
                centroid_dist.insert(g, (sum / n as f64 - ref_pos).norm());
            }
        }

        let mut keyed: Vec<(bool, f64, f64, u32)> = self
            .sites
            .iter()
            .filter(|s| s.species == Species::H1)
            .map(|s| {
                let own = (s.position - ref_pos).norm();
                let block = match (inclusion, s.group_id) {
                    (Inclusion::WholeGroups, Some(g)) => centroid_dist[&g],
                    _ => own,
                };
                (s.molecule_id != ref_mol, block, own, s.id)
            })
            .collect();
        keyed.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        Ok(keyed.into_iter().map(|(_, _, _, id)| id).collect())
    }

    /// Sub-system with every C and N site plus the first `n_p` bath protons.
    /// With whole-group inclusion, `n_p` is rounded up so no jump triple is
    /// split.
    pub fn truncated(&self, n_p: usize, inclusion: Inclusion) -> Result<SpinSystem> {
        let order = self.bath_order(self.reference_site, inclusion)?;
        if n_p > order.len() {
            return Err(Error::Config(format!(
                "requested {n_p} protons but the structure provides {}",
                order.len()
            )));
        }
        let mut cut = n_p;
        if inclusion == Inclusion::WholeGroups {
            // Extend past the cut while it would split a group.
            while cut > 0 && cut < order.len() {
                let last = self.site_by_id(order[cut - 1]).expect("ordered id exists");
                let next = self.site_by_id(order[cut]).expect("ordered id exists");
                match (last.group_id, next.group_id) {
                    (Some(a), Some(b)) if a == b => cut += 1,
                    _ => break,
                }
            }
        }
        let keep: Vec<u32> = order[..cut].to_vec();
        let mut sites: Vec<Site> = self
            .sites
            .iter()
            .filter(|s| s.species != Species::H1 || keep.contains(&s.id))
            .cloned()
            .collect();
        // One-by-one inclusion may cut through a jump group; the survivors of
        // a split group become static sites (jump averaging needs all three
        // placements).
        let mut member_count: HashMap<u32, usize> = HashMap::new();
        for s in &sites {
            if let Some(g) = s.group_id {
                *member_count.entry(g).or_default() += 1;
            }
        }
        for s in &mut sites {
            if let Some(g) = s.group_id {
                if member_count[&g] < 3 {
                    s.group_id = None;
                }
            }
        }
        Ok(SpinSystem {
            sites,
            b0: self.b0,
            reference_site: self.reference_site,
        })
    }

    /// Serialize back to the on-disk JSON representation.
    #[must_use]
    pub fn to_json(&self) -> String {
        let records: Vec<SiteRecord> = self
            .sites
            .iter()
            .map(|s| {
                let t = &s.shift_tensor;
                SiteRecord {
                    id: s.id,
                    species: s.species,
                    xyz_angstrom: [s.position.x, s.position.y, s.position.z],
                    shift_tensor_hz: [
                        t[(0, 0)], t[(0, 1)], t[(0, 2)],
                        t[(1, 1)], t[(1, 2)], t[(2, 2)],
                    ],
                    group_id: s.group_id,
                    molecule_id: s.molecule_id,
                }
            })
            .collect();
        let file = StructureFile {
            b0_proton_larmor_hz: self.b0 * GAMMA_H / (2.0 * std::f64::consts::PI),
            sites: records,
        };
        serde_json::to_string_pretty(&file).expect("structure serialization cannot fail")
    }
}
