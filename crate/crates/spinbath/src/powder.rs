//! Powder averaging: crystallite orientation sampling, parallel trajectory
//! runs with deterministic aggregation, and the local-field dispersion curve.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, BuildOptions, MasConfig, Orientation};
use crate::propagator::{evolve, initial_state, EvolutionConfig, SpinLayout, TrajectoryRecord};
use crate::structure::{Inclusion, SpinSystem};

/// How crystallite orientations are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum OrientationSampling {
    /// Haar-uniform random rotations from `orientation_seed`.
    UniformRandom,
    /// Explicit quaternion list (w, x, y, z), normalized on use; for
    /// regression tests and reproducible grids.
    RepeatableList(Vec<[f64; 4]>),
}

#[derive(Debug, Clone)]
pub struct PowderPlan {
    pub n_orientations: usize,
    pub orientation_seed: u64,
    pub sampling: OrientationSampling,
}

impl Default for PowderPlan {
    fn default() -> Self {
        PowderPlan {
            n_orientations: 200,
            orientation_seed: 1,
            sampling: OrientationSampling::UniformRandom,
        }
    }
}

/// Haar-uniform unit quaternions: four i.i.d. Gaussians, normalized.
pub fn sample_orientations(plan: &PowderPlan) -> Result<Vec<Orientation>> {
    if plan.n_orientations == 0 {
        return Err(Error::Config("powder plan needs at least one orientation".into()));
    }
    match &plan.sampling {
        OrientationSampling::UniformRandom => {
            let mut rng = ChaCha12Rng::seed_from_u64(plan.orientation_seed);
            Ok((0..plan.n_orientations)
                .map(|_| {
                    let g = |rng: &mut ChaCha12Rng| -> f64 { StandardNormal.sample(rng) };
                    let q = Quaternion::new(g(&mut rng), g(&mut rng), g(&mut rng), g(&mut rng));
                    Orientation(UnitQuaternion::from_quaternion(q))
                })
                .collect())
        }
        OrientationSampling::RepeatableList(list) => {
            if list.len() != plan.n_orientations {
                return Err(Error::Config(format!(
                    "orientation list has {} entries, plan wants {}",
                    list.len(),
                    plan.n_orientations
                )));
            }
            list.iter()
                .map(|q| {
                    let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
                    if quat.norm() < 1e-12 {
                        return Err(Error::Config("zero quaternion in orientation list".into()));
                    }
                    Ok(Orientation(UnitQuaternion::from_quaternion(quat)))
                })
                .collect()
        }
    }
}

/// Trajectory mean over (orientation, rest-state seed) pairs with standard
/// errors; aggregation runs in fixed index order, so the result is
/// scheduler-independent.
#[derive(Debug, Clone)]
pub struct PowderAverage {
    pub times: Vec<f64>,
    pub site_ids: Vec<u32>,
    /// `mean[k][i]` = averaged P_z of carbon k at `times[i]`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub n_trajectories: usize,
    pub max_norm_drift: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub build: BuildOptions,
    /// Independent rest-state realizations per orientation.
    pub seeds_per_orientation: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { build: BuildOptions::default(), seeds_per_orientation: 1 }
    }
}

/// Derived per-trajectory seed: decorrelates (orientation, realization)
/// pairs while keeping the whole run reproducible from one base seed.
#[must_use]
pub fn trajectory_seed(base: u64, trajectory_index: usize) -> u64 {
    base.wrapping_add((trajectory_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Run all trajectories of a powder plan and average them.
pub fn powder_average(
    system: &SpinSystem,
    mas: MasConfig,
    plan: &PowderPlan,
    config: &EvolutionConfig,
    options: &RunOptions,
) -> Result<PowderAverage> {
    let records = powder_trajectories(system, mas, plan, config, options)?;
    average_records(&records)
}

/// All per-trajectory records, ordered by (orientation index, seed index).
pub fn powder_trajectories(
    system: &SpinSystem,
    mas: MasConfig,
    plan: &PowderPlan,
    config: &EvolutionConfig,
    options: &RunOptions,
) -> Result<Vec<TrajectoryRecord>> {
    let orientations = sample_orientations(plan)?;
    let layout = SpinLayout::new(system);
    let per = options.seeds_per_orientation.max(1);

    let tasks: Vec<(usize, usize)> = (0..orientations.len())
        .flat_map(|o| (0..per).map(move |s| (o, s)))
        .collect();

    tasks
        .par_iter()
        .map(|&(o_idx, s_idx)| {
            let orientation = &orientations[o_idx];
            let h = build_hamiltonian(system, orientation, mas, options.build);
            let seed = trajectory_seed(config.seed, o_idx * per + s_idx);
            let mut state = initial_state(system, &layout, system.reference_site, seed)?;
            let traj_config = EvolutionConfig { seed, ..*config };
            evolve(system, &h, &mut state, &traj_config).map_err(|e| {
                Error::Numerical(format!("orientation {o_idx}, realization {s_idx}: {e}"))
            })
        })
        .collect()
}

/// Arithmetic mean and standard error across trajectory records.
pub fn average_records(records: &[TrajectoryRecord]) -> Result<PowderAverage> {
    let first = records
        .first()
        .ok_or_else(|| Error::Config("no trajectories to average".into()))?;
    let n = records.len();
    let n_times = first.times.len();
    let n_sites = first.site_ids.len();

    let mut mean = vec![vec![0.0; n_times]; n_sites];
    let mut second = vec![vec![0.0; n_times]; n_sites];
    let mut max_norm_drift = 0.0f64;
    for rec in records {
        if rec.times.len() != n_times || rec.site_ids != first.site_ids {
            return Err(Error::Numerical("trajectory records have mismatched shapes".into()));
        }
        max_norm_drift = max_norm_drift.max(rec.norm_drift);
        for k in 0..n_sites {
            for i in 0..n_times {
                let v = rec.pz[k][i];
                mean[k][i] += v;
                second[k][i] += v * v;
            }
        }
    }
    let mut stderr = vec![vec![0.0; n_times]; n_sites];
    for k in 0..n_sites {
        for i in 0..n_times {
            mean[k][i] /= n as f64;
            let var = (second[k][i] / n as f64 - mean[k][i] * mean[k][i]).max(0.0);
            stderr[k][i] = if n > 1 { (var / (n as f64 - 1.0)).sqrt() } else { 0.0 };
        }
    }
    Ok(PowderAverage {
        times: first.times.clone(),
        site_ids: first.site_ids.clone(),
        mean,
        stderr,
        n_trajectories: n,
        max_norm_drift,
    })
}

/// Orientation-averaging mode for the local-field curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalFieldMode {
    /// Closed-form Haar average: ⟨(1−3cos²θ_a)(1−3cos²θ_b)⟩ = (4/5)·P₂(û_a·û_b).
    Analytic,
    /// Monte-Carlo orientation average with this many samples.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Root-sum-square local field at the reference site as a function of the
/// number of included bath protons.
#[derive(Debug, Clone)]
pub struct LocalFieldCurve {
    /// Proton ids in inclusion order.
    pub proton_ids: Vec<u32>,
    /// Mean-square coupling of each proton to the reference, (rad/s)².
    pub mean_square: Vec<f64>,
    /// `b[k]` = B̄(k) for k = 0..=n protons, rad/s.
    pub b_rad_s: Vec<f64>,
}

/// Time- and orientation-averaged dispersion B̄(n_p) = sqrt(Σ_j Ā²_j) of the
/// dipolar couplings to `reference`, protons included in bath order.
pub fn local_field_dispersion(
    system: &SpinSystem,
    reference: u32,
    inclusion: Inclusion,
    mode: LocalFieldMode,
    quadrature_nodes: usize,
    mas: MasConfig,
    options: BuildOptions,
) -> Result<LocalFieldCurve> {
    if quadrature_nodes < 64 {
        return Err(Error::Config(format!(
            "rotor-period quadrature needs at least 64 nodes, got {quadrature_nodes}"
        )));
    }
    let order = system.bath_order(reference, inclusion)?;
    let mean_square: Vec<f64> = match mode {
        LocalFieldMode::Analytic => order
            .iter()
            .map(|&id| analytic_mean_square(system, reference, id, options.group_average))
            .collect::<Result<_>>()?,
        LocalFieldMode::MonteCarlo { samples, seed } => {
            let plan = PowderPlan {
                n_orientations: samples,
                orientation_seed: seed,
                sampling: OrientationSampling::UniformRandom,
            };
            let orientations = sample_orientations(&plan)?;
            order
                .par_iter()
                .map(|&id| {
                    monte_carlo_mean_square(
                        system,
                        reference,
                        id,
                        &orientations,
                        quadrature_nodes,
                        mas,
                        options.group_average,
                    )
                })
                .collect::<Result<_>>()?
        }
    };

    let mut b = Vec::with_capacity(order.len() + 1);
    let mut acc = 0.0;
    b.push(0.0);
    for &m in &mean_square {
        acc += m;
        b.push(acc.sqrt());
    }
    Ok(LocalFieldCurve { proton_ids: order, mean_square, b_rad_s: b })
}

/// Haar average of A² for a (possibly jump-averaged) pair: the cross terms of
/// the geometry legs correlate through the angle between their unit vectors.
fn analytic_mean_square(
    system: &SpinSystem,
    reference: u32,
    proton: u32,
    group_average: bool,
) -> Result<f64> {
    let legs = crate::hamiltonian::pair_geometry(system, reference, proton, group_average)?;
    let mut acc = 0.0;
    for (wa, ua) in &legs {
        for (wb, ub) in &legs {
            let cos_gamma = ua.dot(ub);
            let p2 = 0.5 * (3.0 * cos_gamma * cos_gamma - 1.0);
            acc += wa * wb * 0.8 * p2;
        }
    }
    Ok(acc)
}

fn monte_carlo_mean_square(
    system: &SpinSystem,
    reference: u32,
    proton: u32,
    orientations: &[Orientation],
    quadrature_nodes: usize,
    mas: MasConfig,
    group_average: bool,
) -> Result<f64> {
    let legs = crate::hamiltonian::pair_geometry(system, reference, proton, group_average)?;
    let period = mas.rotor_period();
    let mut acc = 0.0;
    for orientation in orientations {
        let rot = orientation.matrix();
        let rotated: Vec<(f64, nalgebra::Vector3<f64>)> =
            legs.iter().map(|(w, u)| (*w, rot * u)).collect();
        for node in 0..quadrature_nodes {
            let t = (node as f64 + 0.5) / quadrature_nodes as f64 * period;
            let ph = mas.phase_at(t);
            let a: f64 = rotated
                .iter()
                .map(|(w, u)| {
                    let c = ph.project_field_axis(u);
                    w * (1.0 - 3.0 * c * c)
                })
                .sum();
            acc += a * a;
        }
    }
    Ok(acc / (orientations.len() * quadrature_nodes) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{Site, Species};
    use nalgebra::{Matrix3, Vector3};

    fn simple_system() -> SpinSystem {
        let mk = |id: u32, species: Species, x: f64| Site {
            id,
            species,
            position: Vector3::new(x, 0.0, 0.0),
            shift_tensor: Matrix3::zeros(),
            group_id: None,
            molecule_id: 0,
        };
        SpinSystem {
            sites: vec![mk(0, Species::C13, 0.0), mk(1, Species::H1, 2.2), mk(2, Species::H1, 4.1)],
            b0: 9.4,
            reference_site: 0,
        }
    }

    #[test]
    fn orientation_sampling_is_deterministic() {
        let plan = PowderPlan { n_orientations: 10, orientation_seed: 5, ..Default::default() };
        let a = sample_orientations(&plan).unwrap();
        let b = sample_orientations(&plan).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0.coords, y.0.coords);
        }
    }

    #[test]
    fn orientations_are_haar_uniform() {
        // ⟨(1−3cos²θ)²⟩ = 4/5 for a fixed vector under uniform rotations.
        let plan = PowderPlan { n_orientations: 10_000, orientation_seed: 9, ..Default::default() };
        let v = Vector3::new(0.0, 0.0, 1.0);
        let mean: f64 = sample_orientations(&plan)
            .unwrap()
            .iter()
            .map(|o| {
                let c = (o.matrix() * v).z;
                let x = 1.0 - 3.0 * c * c;
                x * x
            })
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 0.8).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn repeatable_list_round_trips() {
        let plan = PowderPlan {
            n_orientations: 2,
            orientation_seed: 0,
            sampling: OrientationSampling::RepeatableList(vec![
                [1.0, 0.0, 0.0, 0.0],
                [0.5, 0.5, 0.5, 0.5],
            ]),
        };
        let os = sample_orientations(&plan).unwrap();
        assert_eq!(os.len(), 2);
        assert!((os[1].0.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_orientation_average_equals_trajectory() {
        let sys = simple_system();
        let plan = PowderPlan { n_orientations: 1, orientation_seed: 3, ..Default::default() };
        let config = EvolutionConfig { dt: 2e-6, t_max: 2e-4, record_stride: 1, seed: 17 };
        let options = RunOptions::default();
        let records =
            powder_trajectories(&sys, MasConfig::default(), &plan, &config, &options).unwrap();
        let avg = average_records(&records).unwrap();
        assert_eq!(records.len(), 1);
        for (m, v) in avg.mean[0].iter().zip(&records[0].pz[0]) {
            assert_eq!(m, v);
        }
        assert!(avg.stderr[0].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn local_field_analytic_matches_closed_form_for_lone_pair() {
        let sys = simple_system();
        let curve = local_field_dispersion(
            &sys,
            0,
            Inclusion::OneByOne,
            LocalFieldMode::Analytic,
            64,
            MasConfig::default(),
            BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(curve.b_rad_s[0], 0.0);
        let pref = crate::constants::dipolar_prefactor(
            crate::constants::GAMMA_C,
            crate::constants::GAMMA_H,
            2.2,
        );
        let expect = pref * pref * 0.8;
        assert!((curve.mean_square[0] - expect).abs() < 1e-9 * expect);
        // adding a proton can only grow the dispersion
        assert!(curve.b_rad_s.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn local_field_monte_carlo_converges_to_analytic() {
        let sys = simple_system();
        let analytic = local_field_dispersion(
            &sys,
            0,
            Inclusion::OneByOne,
            LocalFieldMode::Analytic,
            64,
            MasConfig::default(),
            BuildOptions::default(),
        )
        .unwrap();
        let mc = local_field_dispersion(
            &sys,
            0,
            Inclusion::OneByOne,
            LocalFieldMode::MonteCarlo { samples: 20_000, seed: 4 },
            64,
            MasConfig::default(),
            BuildOptions::default(),
        )
        .unwrap();
        let (a, m) = (analytic.b_rad_s[2], mc.b_rad_s[2]);
        assert!((a - m).abs() / a < 0.02, "analytic {a} vs MC {m}");
    }

    #[test]
    fn empty_bath_gives_zero_curve() {
        let mut sys = simple_system();
        sys.sites.retain(|s| s.species != Species::H1);
        let curve = local_field_dispersion(
            &sys,
            0,
            Inclusion::WholeGroups,
            LocalFieldMode::Analytic,
            64,
            MasConfig::default(),
            BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(curve.b_rad_s, vec![0.0]);
    }
}
