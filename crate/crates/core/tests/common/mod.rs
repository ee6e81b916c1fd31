//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rgess_core::distributions::{Gaussian, MixtureModel};

/// Two-sided one-sample KS statistic against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic KS p-value with the Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

pub fn mean_and_cov(xs: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut mean = DVector::zeros(d);
    for x in xs {
        mean += x;
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for x in xs {
        let c = x - &mean;
        cov += &c * c.transpose();
    }
    (mean, cov / (n - 1.0))
}

/// Gaussian log density for a general (possibly non-symmetric) square
/// matrix via LU, so every matrix entry can be perturbed independently.
pub fn lu_gaussian_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = x.len() as f64;
    let lu = cov.clone().lu();
    let det = lu.determinant();
    let diff = x - mean;
    let solved = lu.solve(&diff).expect("invertible");
    -0.5 * d * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.abs().ln() - 0.5 * diff.dot(&solved)
}

/// Monte Carlo KL objective `(1/K) Σ_k -log Σ_m w_m N(x_k; μ_m, Σ_m)` with
/// unnormalised weights.
pub fn mc_kl(
    samples: &[DVector<f64>],
    w: &[f64],
    mu: &[DVector<f64>],
    cov: &[DMatrix<f64>],
) -> f64 {
    let mut total = 0.0;
    for x in samples {
        let f: f64 = (0..w.len())
            .map(|m| w[m] * lu_gaussian_log_density(x, &mu[m], &cov[m]).exp())
            .sum();
        total -= f.ln();
    }
    total / samples.len() as f64
}

/// Central-difference gradients of [`mc_kl`] with respect to every weight,
/// mean entry and (unsymmetrised) covariance entry.
pub struct KlGradient {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

pub fn kl_fd_gradient(
    samples: &[DVector<f64>],
    w: &[f64],
    mu: &[DVector<f64>],
    cov: &[DMatrix<f64>],
    h: f64,
) -> KlGradient {
    let m = w.len();
    let d = mu[0].len();
    let f = |w: &[f64], mu: &[DVector<f64>], cov: &[DMatrix<f64>]| mc_kl(samples, w, mu, cov);
    let mut gw = vec![0.0; m];
    for j in 0..m {
        let (mut a, mut b) = (w.to_vec(), w.to_vec());
        a[j] += h;
        b[j] -= h;
        gw[j] = (f(&a, mu, cov) - f(&b, mu, cov)) / (2.0 * h);
    }
    let mut gmu = vec![DVector::zeros(d); m];
    for j in 0..m {
        for i in 0..d {
            let (mut a, mut b) = (mu.to_vec(), mu.to_vec());
            a[j][i] += h;
            b[j][i] -= h;
            gmu[j][i] = (f(w, &a, cov) - f(w, &b, cov)) / (2.0 * h);
        }
    }
    let mut gcov = vec![DMatrix::zeros(d, d); m];
    for j in 0..m {
        for r in 0..d {
            for c in 0..d {
                let (mut a, mut b) = (cov.to_vec(), cov.to_vec());
                a[j][(r, c)] += h;
                b[j][(r, c)] -= h;
                gcov[j][(r, c)] = (f(w, mu, &a) - f(w, mu, &b)) / (2.0 * h);
            }
        }
    }
    KlGradient {
        weights: gw,
        means: gmu,
        covs: gcov,
    }
}

/// Nelder–Mead simplex minimiser. Returns (argmin, min value).
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() < tol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n][k] - centroid[k]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = (0..n)
                        .map(|k| best[k] + 0.5 * (simplex[i][k] - best[k]))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap())
        .unwrap();
    (simplex[best].clone(), values[best])
}

/// Two well separated 1D clusters at ±10, 500 points each.
pub fn pm10_samples(seed: u64) -> Vec<DVector<f64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::new();
    for _ in 0..500 {
        out.push(DVector::from_vec(vec![-10.0 + n.sample(&mut rng)]));
        out.push(DVector::from_vec(vec![10.0 + n.sample(&mut rng)]));
    }
    out
}

pub fn sa_instance(seed: u64) -> (MixtureModel<Gaussian>, Vec<DVector<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps = Vec::new();
    for _ in 0..2 {
        let mean = DVector::from_fn(2, |_, _| {
            2.0 * {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            }
        });
        let a = DMatrix::from_fn(2, 2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let cov = &a * a.transpose() + DMatrix::identity(2, 2);
        comps.push(Gaussian::new(mean, (&cov + cov.transpose()) * 0.5).unwrap());
    }
    let w0: f64 = 0.3 + 0.4 * rand::RngExt::random::<f64>(&mut rng);
    let mixture = MixtureModel::new(vec![w0, 1.0 - w0], comps).unwrap();
    let samples = (0..20).map(|_| mixture.sample(&mut rng) * 1.3).collect();
    (mixture, samples)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn outlier_fixture(
    seed: u64,
) -> (Vec<DVector<f64>>, MixtureModel<Gaussian>, Vec<DVector<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [(0.0, 0.0, 70), (6.0, 0.0, 70), (3.0, 5.0, 60)];
    let mut samples = Vec::new();
    for &(cx, cy, n) in &centers {
        for _ in 0..n {
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zy: f64 = StandardNormal.sample(&mut rng);
            samples.push(DVector::from_vec(vec![cx + zx, cy + zy]));
        }
    }
    let outliers = vec![
        DVector::from_vec(vec![30.0, 2.0]),
        DVector::from_vec(vec![30.3, 2.2]),
    ];
    samples.extend(outliers.iter().cloned());
    let truth = MixtureModel::new(
        vec![0.35, 0.35, 0.3],
        centers
            .iter()
            .map(|&(x, y, _)| Gaussian::isotropic(DVector::from_vec(vec![x, y]), 1.0).unwrap())
            .collect(),
    )
    .unwrap();
    (samples, truth, outliers)
}

pub fn min_distance_to_outliers(m: &MixtureModel<Gaussian>, outliers: &[DVector<f64>]) -> f64 {
    m.components()
        .iter()
        .flat_map(|g| outliers.iter().map(move |o| (g.mean() - o).norm()))
        .fold(f64::INFINITY, f64::min)
}

/// Weight, mean and sd of the 1D bimodal stationarity target.
pub const BIMODAL: [(f64, f64, f64); 2] = [(0.4, -4.0, 1.0), (0.6, 3.0, 1.5)];
pub const GRID: (f64, f64, usize) = (-10.0, 10.0, 41);

pub fn bimodal_log_density(x: f64) -> f64 {
    let p: f64 = BIMODAL
        .iter()
        .map(|&(w, m, s)| {
            let z = (x - m) / s;
            w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        })
        .sum();
    p.ln()
}

/// Exact bin masses of the bimodal target; the end bins absorb the tails.
pub fn bimodal_bin_masses() -> Vec<f64> {
    let (lo, hi, bins) = GRID;
    let width = (hi - lo) / bins as f64;
    let cdf = |x: f64| -> f64 {
        BIMODAL
            .iter()
            .map(|&(w, m, s)| w * normal_cdf(x, m, s))
            .sum()
    };
    (0..bins)
        .map(|b| {
            let a = if b == 0 {
                f64::NEG_INFINITY
            } else {
                lo + b as f64 * width
            };
            let z = if b + 1 == bins {
                f64::INFINITY
            } else {
                lo + (b + 1) as f64 * width
            };
            let ca = if a.is_finite() { cdf(a) } else { 0.0 };
            let cz = if z.is_finite() { cdf(z) } else { 1.0 };
            cz - ca
        })
        .collect()
}

pub fn grid_bin(x: f64) -> usize {
    let (lo, hi, bins) = GRID;
    let b = ((x - lo) / (hi - lo) * bins as f64).floor();
    b.clamp(0.0, (bins - 1) as f64) as usize
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pseudo-prior mixture deliberately offset from the bimodal target.
pub fn bimodal_pseudo_prior() -> MixtureModel<Gaussian> {
    MixtureModel::new(
        vec![0.5, 0.5],
        vec![
            Gaussian::isotropic(DVector::from_element(1, -3.0), 2.0).unwrap(),
            Gaussian::isotropic(DVector::from_element(1, 2.0), 4.0).unwrap(),
        ],
    )
    .unwrap()
}

/// Stationary vector of a row-stochastic matrix by power iteration.
pub fn stationary_vector(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += v[i] * p[i][j];
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if diff < 1e-14 {
            break;
        }
    }
    v
}

/// Draw from the bimodal target restricted to grid bin `b` by rejection.
pub fn bimodal_draw_in_bin(b: usize, rng: &mut ChaCha8Rng) -> f64 {
    use rand::RngExt;
    let (lo, hi, bins) = GRID;
    let width = (hi - lo) / bins as f64;
    let (a, z) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
    let peak = bimodal_log_density(a).max(bimodal_log_density(z)).max(
        BIMODAL
            .iter()
            .filter(|&&(_, m, _)| m > a && m < z)
            .map(|&(_, m, _)| bimodal_log_density(m))
            .fold(f64::NEG_INFINITY, f64::max),
    );
    loop {
        let x = a + width * rng.random::<f64>();
        if rng.random::<f64>().ln() < bimodal_log_density(x) - peak - 1e-9 {
            return x;
        }
    }
}

/// Total-variation gap between the bin masses and the stationary vector of
/// the empirical one-step transition matrix of `step`, with `total_steps`
/// spread evenly over start bins.
pub fn transition_matrix_tv(
    step: impl FnMut(f64, &mut ChaCha8Rng) -> f64,
    total_steps: usize,
    seed: u64,
) -> f64 {
    let p = empirical_transition_matrix(step, total_steps, seed);
    total_variation(&stationary_vector(&p), &bimodal_bin_masses())
}

/// Row `i` holds the bin frequencies after one step from target draws in bin `i`.
pub fn empirical_transition_matrix(
    mut step: impl FnMut(f64, &mut ChaCha8Rng) -> f64,
    total_steps: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let bins = GRID.2;
    let per_bin = total_steps / bins;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![vec![0.0; bins]; bins];
    for (i, row) in p.iter_mut().enumerate() {
        for _ in 0..per_bin {
            let x = bimodal_draw_in_bin(i, &mut rng);
            row[grid_bin(step(x, &mut rng))] += 1.0;
        }
        row.iter_mut().for_each(|c| *c /= per_bin as f64);
    }
    p
}

/// Gap between the bin masses and their image after one empirical step.
pub fn one_step_invariance_tv(p: &[Vec<f64>]) -> f64 {
    let masses = bimodal_bin_masses();
    let mut image = vec![0.0; masses.len()];
    for (i, row) in p.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            image[j] += masses[i] * v;
        }
    }
    total_variation(&image, &masses)
}
