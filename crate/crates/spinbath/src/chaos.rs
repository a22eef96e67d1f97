//! Level-spacing statistics of the proton bath.
//!
//! The instantaneous proton-only Hamiltonian (t = 0, jump averaging disabled,
//! shift terms retained) conserves total S_z, so it is diagonalized inside one
//! magnetization sector. The sorted eigenvalues are unfolded with a low-order
//! polynomial fit to the spectral staircase, nearest-neighbour spacings are
//! histogrammed, and the chaoticity parameter
//!
//! ```text
//! η = ∫₀^{s₀} [P(s) − P_WD(s)] ds / ∫₀^{s₀} [P_P(s) − P_WD(s)] ds
//! ```
//!
//! compares the result against the Poisson (P_P = e^{−s}) and Wigner-Dyson
//! (P_WD = (π/2) s e^{−πs²/4}) references, with s₀ their first crossing.
//! η → 1 for uncorrelated (integrable-like) spectra, η → 0 for GOE-like
//! level repulsion. All reference integrals use the same bin-averaged
//! quadrature as the histogram, so the identities η(P_P) = 1 and
//! η(P_WD) = 0 hold exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, BuildOptions, MasConfig, Orientation};
use crate::linalg;
use crate::structure::{Inclusion, Species, SpinSystem};

/// Knobs for the spacing-statistics pipeline.
#[derive(Debug, Clone, Copy)]
pub struct ChaosOptions {
    /// Magnetization sector (number of up spins). `None` picks the largest
    /// sector at or below `max_sector_dim`, searching down from half filling.
    pub n_up: Option<usize>,
    /// Hard cap on the proton count eligible for diagonalization.
    pub max_protons: usize,
    /// Hard cap on the sector dimension (memory guard).
    pub max_sector_dim: usize,
    /// Degree of the staircase fit.
    pub unfold_degree: usize,
    /// Fraction of levels dropped at each spectral edge before fitting.
    pub edge_trim: f64,
    pub bin_width: f64,
    pub s_max: f64,
}

impl Default for ChaosOptions {
    fn default() -> Self {
        ChaosOptions {
            n_up: None,
            max_protons: 17,
            max_sector_dim: 8000,
            unfold_degree: 9,
            edge_trim: 0.05,
            bin_width: 0.1,
            s_max: 4.0,
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).expect("sector dimension fits usize")
}

/// Pick the sector: requested if it fits, otherwise the largest one at or
/// below the dimension cap.
pub fn resolve_sector(n_p: usize, opts: &ChaosOptions) -> Result<usize> {
    if n_p > opts.max_protons {
        return Err(Error::ResourceCap(format!(
            "{n_p} protons exceed the diagonalization cap of {}",
            opts.max_protons
        )));
    }
    match opts.n_up {
        Some(k) => {
            if k > n_p {
                return Err(Error::Config(format!("sector {k} exceeds proton count {n_p}")));
            }
            let dim = binomial(n_p, k);
            if dim > opts.max_sector_dim {
                return Err(Error::ResourceCap(format!(
                    "sector dimension {dim} exceeds cap {}",
                    opts.max_sector_dim
                )));
            }
            Ok(k)
        }
        None => (0..=n_p / 2)
            .rev()
            .find(|&k| binomial(n_p, k) <= opts.max_sector_dim)
            .ok_or_else(|| {
                Error::ResourceCap(format!(
                    "no magnetization sector of {n_p} protons fits in {} states",
                    opts.max_sector_dim
                ))
            }),
    }
}

/// All basis masks of a fixed-magnetization sector, ascending.
#[must_use]
pub fn sector_basis(n_p: usize, n_up: usize) -> Vec<u64> {
    assert!(n_p < 64, "mask width");
    (0u64..(1u64 << n_p))
        .filter(|m| m.count_ones() as usize == n_up)
        .collect()
}

/// The proton-only subsystem with the first `n_p` bath protons.
pub fn proton_subsystem(system: &SpinSystem, n_p: usize, inclusion: Inclusion) -> Result<SpinSystem> {
    let truncated = system.truncated(n_p, inclusion)?;
    let sites: Vec<_> = truncated
        .sites
        .into_iter()
        .filter(|s| s.species == Species::H1)
        .collect();
    let reference = sites
        .first()
        .map(|s| s.id)
        .ok_or_else(|| Error::Config("no protons in system".into()))?;
    Ok(SpinSystem { sites, b0: truncated.b0, reference_site: reference })
}

/// Eigenvalues of the proton Hamiltonian restricted to one S_z sector.
///
/// `system` must contain protons only (see [`proton_subsystem`]); coefficients
/// are frozen at t = 0 and jump averaging is off, matching how the spectral
/// statistics are defined for a static snapshot of the bath.
pub fn sector_eigenvalues(
    system: &SpinSystem,
    orientation: &Orientation,
    mas: MasConfig,
    n_up: usize,
    opts: &ChaosOptions,
) -> Result<Vec<f64>> {
    let n_p = system.sites.len();
    if n_p == 0 || system.sites.iter().any(|s| s.species != Species::H1) {
        return Err(Error::Config("sector diagonalization expects a proton-only system".into()));
    }
    if n_p > opts.max_protons {
        return Err(Error::ResourceCap(format!(
            "{n_p} protons exceed the diagonalization cap of {}",
            opts.max_protons
        )));
    }
    let dim = binomial(n_p, n_up);
    if dim > opts.max_sector_dim {
        return Err(Error::ResourceCap(format!(
            "sector dimension {dim} exceeds cap {}",
            opts.max_sector_dim
        )));
    }
    if dim == 0 {
        return Err(Error::Config(format!("empty sector {n_up} of {n_p} protons")));
    }

    let build = BuildOptions { group_average: false, ..BuildOptions::default() };
    let h = build_hamiltonian(system, orientation, mas, build);
    debug_assert!(h.unlike_pairs.is_empty());

    let ph = h.mas.phase_at(0.0);
    let shifts: Vec<f64> = {
        let mut w = vec![0.0; n_p];
        for term in &h.z_terms {
            w[term.site] = term.shift(&ph);
        }
        w
    };
    let pairs: Vec<(usize, usize, f64)> = h
        .like_pairs
        .iter()
        .map(|p| (p.site_i, p.site_j, p.coupling(&ph)))
        .collect();

    let masks = sector_basis(n_p, n_up);
    let mut matrix = vec![0.0f64; dim * dim];
    let sz = |mask: u64, bit: usize| -> f64 {
        if mask >> bit & 1 == 1 { 0.5 } else { -0.5 }
    };
    for (col, &mask) in masks.iter().enumerate() {
        let mut diag = 0.0;
        for (bit, w) in shifts.iter().enumerate() {
            diag += w * sz(mask, bit);
        }
        for &(i, j, a) in &pairs {
            diag += -2.0 * a * sz(mask, i) * sz(mask, j);
        }
        matrix[col * dim + col] = diag;
        for &(i, j, a) in &pairs {
            // Flip-flop connects |…0ᵢ…1ⱼ…⟩ ↔ |…1ᵢ…0ⱼ…⟩ within the sector.
            if (mask >> i & 1) != (mask >> j & 1) {
                let flipped = mask ^ (1 << i) ^ (1 << j);
                if flipped > mask {
                    let row = masks.binary_search(&flipped).expect("sector closed under flip-flop");
                    matrix[col * dim + row] += 0.5 * a;
                    matrix[row * dim + col] += 0.5 * a;
                }
            }
        }
    }
    linalg::sym_eigenvalues(&mut matrix, dim)
}

/// Unfold a sorted spectrum: fit the staircase with a polynomial, map levels
/// through the fit, and return nearest-neighbour spacings with mean exactly 1.
pub fn unfolded_spacings(eigenvalues: &[f64], degree: usize, edge_trim: f64) -> Result<Vec<f64>> {
    let mut levels = eigenvalues.to_vec();
    levels.sort_by(f64::total_cmp);
    let n = levels.len();
    if n < 32 {
        return Err(Error::Numerical(format!("unfolding needs at least 32 levels, got {n}")));
    }
    let span = levels[n - 1] - levels[0];
    if span <= 0.0 {
        return Err(Error::Numerical("spectrum has zero spread".into()));
    }
    let near_zero = levels
        .windows(2)
        .filter(|w| (w[1] - w[0]).abs() < 1e-12 * span)
        .count();
    if near_zero * 10 > n {
        return Err(Error::Numerical(format!(
            "degenerate spectrum: {near_zero} of {n} raw spacings vanish"
        )));
    }

    let trim = ((n as f64) * edge_trim).floor() as usize;
    let (lo, hi) = (trim, n - trim);
    if hi - lo < 16 {
        return Err(Error::Numerical("edge trim leaves too few levels".into()));
    }
    let (xmin, xmax) = (levels[lo], levels[hi - 1]);
    if xmax - xmin <= 0.0 {
        return Err(Error::Numerical("trimmed spectrum has zero spread".into()));
    }
    let degree = degree.min(hi - lo - 2).max(1);

    // Staircase midpoints against energies rescaled to [−1, 1]; the rescale
    // keeps the Vandermonde system well conditioned up to degree ~10 and makes
    // the fit exactly invariant under affine maps of the spectrum.
    let m = hi - lo;
    let zs: Vec<f64> = levels[lo..hi]
        .iter()
        .map(|&e| 2.0 * (e - xmin) / (xmax - xmin) - 1.0)
        .collect();
    let mut vander = vec![0.0f64; m * (degree + 1)];
    for (row, &z) in zs.iter().enumerate() {
        let mut p = 1.0;
        for c in 0..=degree {
            vander[c * m + row] = p;
            p *= z;
        }
    }
    let mut y: Vec<f64> = (lo..hi).map(|i| i as f64 + 0.5).collect();
    let coeff = linalg::least_squares(&mut vander, m, degree + 1, &mut y)?;
    let fitted: Vec<f64> = zs
        .iter()
        .map(|&z| {
            let mut acc = 0.0;
            for c in (0..=degree).rev() {
                acc = acc * z + coeff[c];
            }
            acc
        })
        .collect();

    // Rare non-monotone wiggles of the fit map to s < 0; they represent
    // near-degeneracies and are clipped into the first bin.
    let mut spacings: Vec<f64> = fitted.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Numerical("unfolded spacings have non-positive mean".into()));
    }
    for s in &mut spacings {
        *s /= mean;
    }
    Ok(spacings)
}

/// Normalized spacing histogram: `density[k]` estimates P(s) on
/// `[k·w, (k+1)·w)`; mass beyond `s_max` is dropped from the density but kept
/// in `total_count`, so the densities of different spectra stay comparable.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingHistogram {
    pub bin_width: f64,
    pub s_max: f64,
    pub density: Vec<f64>,
    pub total_count: usize,
}

impl SpacingHistogram {
    #[must_use]
    pub fn n_bins(&self) -> usize {
        self.density.len()
    }

    /// Left edge of bin `k`.
    #[must_use]
    pub fn edge(&self, k: usize) -> f64 {
        k as f64 * self.bin_width
    }
}

pub fn spacing_histogram(spacings: &[f64], bin_width: f64, s_max: f64) -> Result<SpacingHistogram> {
    if spacings.is_empty() {
        return Err(Error::Numerical("no spacings to histogram".into()));
    }
    if !(bin_width > 0.0 && s_max > bin_width) {
        return Err(Error::Config(format!("bad histogram shape: width {bin_width}, max {s_max}")));
    }
    let n_bins = (s_max / bin_width).round() as usize;
    let mut counts = vec![0usize; n_bins];
    for &s in spacings {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Numerical(format!("invalid spacing {s}")));
        }
        let k = (s / bin_width) as usize;
        if k < n_bins {
            counts[k] += 1;
        }
    }
    let total = spacings.len();
    let density = counts
        .iter()
        .map(|&c| c as f64 / (total as f64 * bin_width))
        .collect();
    Ok(SpacingHistogram { bin_width, s_max, density, total_count: total })
}

/// Equal-weight average of per-orientation histograms.
pub fn average_histograms(histograms: &[SpacingHistogram]) -> Result<SpacingHistogram> {
    let first = histograms
        .first()
        .ok_or_else(|| Error::Numerical("no histograms to average".into()))?;
    let mut density = vec![0.0; first.density.len()];
    let mut total = 0usize;
    for h in histograms {
        if h.bin_width != first.bin_width || h.density.len() != first.density.len() {
            return Err(Error::Numerical("histogram shapes differ".into()));
        }
        total += h.total_count;
        for (d, v) in density.iter_mut().zip(&h.density) {
            *d += v;
        }
    }
    for d in &mut density {
        *d /= histograms.len() as f64;
    }
    Ok(SpacingHistogram {
        bin_width: first.bin_width,
        s_max: first.s_max,
        density,
        total_count: total,
    })
}

/// P_P mass on `[a, b)`.
fn poisson_mass(a: f64, b: f64) -> f64 {
    (-a).exp() - (-b).exp()
}

/// P_WD mass on `[a, b)`.
fn wigner_mass(a: f64, b: f64) -> f64 {
    let q = std::f64::consts::PI / 4.0;
    (-q * a * a).exp() - (-q * b * b).exp()
}

/// First crossing of the Poisson and Wigner-Dyson densities (≈ 0.4729),
/// found once by bisection.
#[must_use]
pub fn s0_crossing() -> f64 {
    static S0: OnceLock<f64> = OnceLock::new();
    *S0.get_or_init(|| {
        let f = |s: f64| (-s).exp() - std::f64::consts::FRAC_PI_2 * s * (-std::f64::consts::PI * s * s / 4.0).exp();
        let (mut lo, mut hi) = (0.1f64, 1.0f64);
        debug_assert!(f(lo) > 0.0 && f(hi) < 0.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Chaoticity parameter of a spacing histogram.
///
/// Numerator and denominator integrate over the bins overlapping `[0, s₀]`,
/// with the references entering through their full-bin averages — the same
/// quadrature the histogram itself represents. A histogram whose density
/// equals the bin-averaged Poisson (Wigner-Dyson) reference therefore gives
/// exactly 1 (exactly 0).
pub fn eta_from_histogram(hist: &SpacingHistogram) -> Result<f64> {
    let s0 = s0_crossing();
    if hist.s_max < s0 {
        return Err(Error::Config(format!("histogram must reach s₀ ≈ {s0:.4}")));
    }
    let w = hist.bin_width;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (k, &density) in hist.density.iter().enumerate() {
        let lo = k as f64 * w;
        if lo >= s0 {
            break;
        }
        let overlap = (lo + w).min(s0) - lo;
        let p_avg = poisson_mass(lo, lo + w) / w;
        let wd_avg = wigner_mass(lo, lo + w) / w;
        numerator += (density - wd_avg) * overlap;
        denominator += (p_avg - wd_avg) * overlap;
    }
    if denominator <= 0.0 {
        return Err(Error::Numerical("degenerate η denominator".into()));
    }
    Ok(numerator / denominator)
}

/// Full pipeline for a raw spectrum: unfold, histogram, η.
pub fn eta_of_levels(eigenvalues: &[f64], opts: &ChaosOptions) -> Result<f64> {
    let spacings = unfolded_spacings(eigenvalues, opts.unfold_degree, opts.edge_trim)?;
    let hist = spacing_histogram(&spacings, opts.bin_width, opts.s_max)?;
    eta_from_histogram(&hist)
}

/// Spacing statistics of the proton bath, averaged over crystallite
/// orientations with equal weights.
#[derive(Debug, Clone)]
pub struct SpacingStatistics {
    pub n_p: usize,
    pub n_up: usize,
    pub dimension: usize,
    pub histogram: SpacingHistogram,
    pub eta: f64,
    pub per_orientation_eta: Vec<f64>,
    pub s0: f64,
}

/// Diagonalize the first `n_p` bath protons of `system` for every orientation
/// and pool the spacing statistics.
///
/// Orientations run sequentially on purpose: one sector matrix plus solver
/// workspace can already claim most of the memory budget.
pub fn spacing_statistics(
    system: &SpinSystem,
    n_p: usize,
    inclusion: Inclusion,
    orientations: &[Orientation],
    mas: MasConfig,
    opts: &ChaosOptions,
) -> Result<SpacingStatistics> {
    if orientations.is_empty() {
        return Err(Error::Config("spacing statistics need at least one orientation".into()));
    }
    let protons = proton_subsystem(system, n_p, inclusion)?;
    let n_found = protons.sites.len();
    if n_found != n_p {
        return Err(Error::Config(format!(
            "requested {n_p} bath protons, system provides {n_found}"
        )));
    }
    let n_up = resolve_sector(n_p, opts)?;
    let dimension = binomial(n_p, n_up);

    let mut histograms = Vec::with_capacity(orientations.len());
    let mut per_orientation_eta = Vec::with_capacity(orientations.len());
    for orientation in orientations {
        let levels = sector_eigenvalues(&protons, orientation, mas, n_up, opts)?;
        let spacings = unfolded_spacings(&levels, opts.unfold_degree, opts.edge_trim)?;
        let hist = spacing_histogram(&spacings, opts.bin_width, opts.s_max)?;
        per_orientation_eta.push(eta_from_histogram(&hist)?);
        histograms.push(hist);
    }
    let histogram = average_histograms(&histograms)?;
    let eta = eta_from_histogram(&histogram)?;
    Ok(SpacingStatistics {
        n_p,
        n_up,
        dimension,
        histogram,
        eta,
        per_orientation_eta,
        s0: s0_crossing(),
    })
}

/// Synthetic integrable-like spectrum: cumulative sums of Exp(1) gaps.
#[must_use]
pub fn poisson_levels(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    (0..n)
        .map(|_| {
            let u: f64 = rand::Rng::gen_range(&mut rng, f64::EPSILON..1.0);
            acc += -u.ln();
            acc
        })
        .collect()
}

/// Eigenvalues of one GOE sample: symmetric Gaussian matrix with off-diagonal
/// variance 1 and diagonal variance 2.
pub fn goe_eigenvalues(n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = |scale: f64| -> f64 {
        let x: f64 = StandardNormal.sample(&mut rng);
        scale * x
    };
    let mut matrix = vec![0.0f64; n * n];
    for col in 0..n {
        matrix[col * n + col] = g(std::f64::consts::SQRT_2);
        for row in (col + 1)..n {
            let v = g(1.0);
            matrix[col * n + row] = v;
            matrix[row * n + col] = v;
        }
    }
    linalg::sym_eigenvalues(&mut matrix, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::dense_matrix;
    use crate::structure::Site;
    use nalgebra::{Matrix3, Vector3};
    use rand::Rng;

    fn random_proton_system(n: usize, seed: u64) -> SpinSystem {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut sites = Vec::new();
        while sites.len() < n {
            let p = Vector3::new(
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
            );
            if sites
                .iter()
                .all(|s: &Site| (s.position - p).norm() > 1.2)
            {
                let iso = rng.gen_range(-2000.0..2000.0);
                sites.push(Site {
                    id: sites.len() as u32,
                    species: Species::H1,
                    position: p,
                    shift_tensor: Matrix3::identity() * iso,
                    group_id: None,
                    molecule_id: 0,
                });
            }
        }
        SpinSystem { sites, b0: 9.4, reference_site: 0 }
    }

    #[test]
    fn sector_basis_counts_and_order() {
        let basis = sector_basis(5, 2);
        assert_eq!(basis.len(), 10);
        assert!(basis.windows(2).all(|w| w[0] < w[1]));
        assert!(basis.iter().all(|m| m.count_ones() == 2));
    }

    #[test]
    fn sector_union_reproduces_full_spectrum() {
        // Eigenvalues of all sectors together must equal the 2^n dense
        // spectrum — the sector construction is checked against the
        // independent dense builder.
        let sys = random_proton_system(5, 11);
        let or = Orientation::identity();
        let mas = MasConfig::default();
        let opts = ChaosOptions::default();

        let mut union = Vec::new();
        for k in 0..=5 {
            union.extend(sector_eigenvalues(&sys, &or, mas, k, &opts).unwrap());
        }
        union.sort_by(f64::total_cmp);

        let build = BuildOptions { group_average: false, ..BuildOptions::default() };
        let h = build_hamiltonian(&sys, &or, mas, build);
        let mut dense = dense_matrix(&h, 5, &mas.phase_at(0.0)).unwrap();
        let mut full = crate::linalg::sym_eigenvalues(&mut dense, 32).unwrap();
        full.sort_by(f64::total_cmp);

        assert_eq!(union.len(), 32);
        let scale = full.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        for (a, b) in union.iter().zip(&full) {
            assert!((a - b).abs() < 1e-9 * scale.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn picket_fence_unfolds_to_unit_spacings() {
        let levels: Vec<f64> = (0..400).map(|i| 3.0 + 0.25 * i as f64).collect();
        let spacings = unfolded_spacings(&levels, 9, 0.05).unwrap();
        for s in &spacings {
            assert!((s - 1.0).abs() < 1e-6, "spacing {s}");
        }
    }

    #[test]
    fn unfolding_is_scale_and_shift_invariant() {
        let levels = poisson_levels(600, 42);
        let moved: Vec<f64> = levels.iter().map(|e| 10.0 * e + 7.0).collect();
        let opts = ChaosOptions::default();
        let a = eta_of_levels(&levels, &opts).unwrap();
        let b = eta_of_levels(&moved, &opts).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn degenerate_spectrum_is_flagged() {
        let mut levels: Vec<f64> = (0..200).map(|i| (i / 2) as f64).collect();
        levels.sort_by(f64::total_cmp);
        assert!(matches!(
            unfolded_spacings(&levels, 9, 0.05),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn too_few_levels_rejected() {
        let levels: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(unfolded_spacings(&levels, 9, 0.05).is_err());
    }

    #[test]
    fn poisson_histogram_matches_exponential() {
        // Raw Exp(1) spacings, no unfolding: the histogram must track e^{−s}.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let spacings: Vec<f64> = (0..100_000)
            .map(|_| -rng.gen_range(f64::EPSILON..1.0f64).ln())
            .collect();
        let hist = spacing_histogram(&spacings, 0.1, 4.0).unwrap();
        for (k, &d) in hist.density.iter().enumerate() {
            let (lo, hi) = (hist.edge(k), hist.edge(k) + 0.1);
            let reference = poisson_mass(lo, hi) / 0.1;
            assert!((d - reference).abs() < 0.03, "bin {k}: {d} vs {reference}");
        }
    }

    #[test]
    fn eta_identities_are_exact() {
        let synth = |mass: fn(f64, f64) -> f64| {
            let density: Vec<f64> = (0..40)
                .map(|k| mass(k as f64 * 0.1, (k + 1) as f64 * 0.1) / 0.1)
                .collect();
            SpacingHistogram { bin_width: 0.1, s_max: 4.0, density, total_count: 1 }
        };
        let eta_p = eta_from_histogram(&synth(poisson_mass)).unwrap();
        let eta_wd = eta_from_histogram(&synth(wigner_mass)).unwrap();
        assert!((eta_p - 1.0).abs() < 1e-12, "η(P_P) = {eta_p}");
        assert!(eta_wd.abs() < 1e-12, "η(P_WD) = {eta_wd}");
    }

    #[test]
    fn s0_solves_the_crossing_equation() {
        let s0 = s0_crossing();
        assert!(s0 > 0.4 && s0 < 0.55, "s₀ = {s0}");
        let p = (-s0).exp();
        let wd = std::f64::consts::FRAC_PI_2 * s0 * (-std::f64::consts::PI * s0 * s0 / 4.0).exp();
        assert!((p - wd).abs() < 1e-9);
    }

    #[test]
    fn poisson_levels_give_eta_near_one() {
        let levels = poisson_levels(4000, 8);
        let eta = eta_of_levels(&levels, &ChaosOptions::default()).unwrap();
        assert!(eta > 0.9, "η = {eta}");
    }

    #[test]
    fn histogram_average_is_equal_weight() {
        let a = SpacingHistogram {
            bin_width: 0.1,
            s_max: 0.3,
            density: vec![1.0, 2.0, 3.0],
            total_count: 10,
        };
        let b = SpacingHistogram {
            bin_width: 0.1,
            s_max: 0.3,
            density: vec![3.0, 2.0, 1.0],
            total_count: 30,
        };
        let avg = average_histograms(&[a, b]).unwrap();
        assert_eq!(avg.density, vec![2.0, 2.0, 2.0]);
        assert_eq!(avg.total_count, 40);
    }

    #[test]
    fn sector_caps_are_enforced() {
        let opts = ChaosOptions { max_protons: 4, ..ChaosOptions::default() };
        assert!(matches!(resolve_sector(5, &opts), Err(Error::ResourceCap(_))));
        let tight = ChaosOptions { max_sector_dim: 5, ..ChaosOptions::default() };
        // C(6,1) = 6 > 5 but C(6,0) = 1 fits.
        assert_eq!(resolve_sector(6, &tight).unwrap(), 0);
        let explicit = ChaosOptions { n_up: Some(3), max_sector_dim: 10, ..ChaosOptions::default() };
        assert!(matches!(resolve_sector(6, &explicit), Err(Error::ResourceCap(_))));
    }
}
