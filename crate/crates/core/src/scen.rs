//! Wind power scenario engine: Beta marginals moment-matched to a
//! quadratic variance law, Gaussian-copula sampling over a Spearman rank
//! correlation, greedy fast-forward reduction, and quantile-based
//! deterministic reserve requirements.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Beta, ContinuousCDF, Normal};
use thiserror::Error;

use crate::net::PowerNetwork;

/// Default quadratic variance law sigma^2(p) = c0 + c1 p + c2 p^2.
/// The coefficients are a documented assumption; callers can override.
pub const DEFAULT_VARIANCE_COEFFS: (f64, f64, f64) = (0.04, 0.10, -0.10);

/// Default e-folding distance of the stand-in spatial correlation
/// exp(-|bus_i - bus_j| / tau) over bus indices.
pub const DEFAULT_CORR_TAU: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ScenError {
    #[error("point forecast {0} is a boundary value; the distribution degenerates to a point mass")]
    DegenerateForecast(f64),
    #[error("infeasible Beta variance {variance} for point forecast {p_hat}: need 0 < var < p(1-p) = {limit}")]
    InfeasibleVariance {
        p_hat: f64,
        variance: f64,
        limit: f64,
    },
    #[error("point forecast {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("correlation matrix is not positive semidefinite: smallest eigenvalue {0}")]
    NonPsd(f64),
    #[error("correlation matrix malformed: {0}")]
    BadCorrelation(String),
    #[error("scenario count must be at least 1")]
    BadCount,
    #[error("reduction target {target} outside 1..={available}")]
    BadTarget { target: usize, available: usize },
    #[error("quantile {0} outside (0, 0.5)")]
    BadQuantile(f64),
    #[error("scenario probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("scenario file line {line}: {msg}")]
    File { line: usize, msg: String },
    #[error("scenario set empty")]
    Empty,
}

/// Per-farm probabilistic forecast plus the spatial dependence structure.
#[derive(Debug, Clone)]
pub struct ProbabilisticForecast {
    pub farm_ids: Vec<u32>,
    /// Point forecasts as fractions of capacity, in [0, 1].
    pub point_fractions: Vec<f64>,
    pub capacities: Vec<f64>,
    /// sigma^2(p) = c0 + c1 p + c2 p^2 on the per-unit forecast.
    pub variance_coeffs: (f64, f64, f64),
    /// Spearman rank correlation, J x J.
    pub rank_correlation: DMatrix<f64>,
}

impl ProbabilisticForecast {
    /// Builds a forecast from the network's wind fleet with the stand-in
    /// distance-decay correlation exp(-|bus_i - bus_j|/tau).
    pub fn from_network(
        net: &PowerNetwork,
        variance_coeffs: (f64, f64, f64),
        tau: f64,
    ) -> Result<Self, ScenError> {
        let j = net.n_wind();
        let mut corr = DMatrix::identity(j, j);
        for a in 0..j {
            for b in 0..j {
                if a != b {
                    let d = (net.wind_farms[a].bus as f64 - net.wind_farms[b].bus as f64).abs();
                    corr[(a, b)] = (-d / tau).exp();
                }
            }
        }
        let f = ProbabilisticForecast {
            farm_ids: net.wind_farms.iter().map(|w| w.id).collect(),
            point_fractions: net
                .wind_farms
                .iter()
                .map(|w| if w.capacity > 0.0 { w.forecast / w.capacity } else { 0.0 })
                .collect(),
            capacities: net.wind_farms.iter().map(|w| w.capacity).collect(),
            variance_coeffs,
            rank_correlation: corr,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn n_farms(&self) -> usize {
        self.farm_ids.len()
    }

    pub fn validate(&self) -> Result<(), ScenError> {
        let j = self.n_farms();
        if self.rank_correlation.nrows() != j || self.rank_correlation.ncols() != j {
            return Err(ScenError::BadCorrelation(format!(
                "expected {j}x{j}, got {}x{}",
                self.rank_correlation.nrows(),
                self.rank_correlation.ncols()
            )));
        }
        for a in 0..j {
            if (self.rank_correlation[(a, a)] - 1.0).abs() > 1e-9 {
                return Err(ScenError::BadCorrelation("diagonal must be 1".into()));
            }
            for b in 0..j {
                if (self.rank_correlation[(a, b)] - self.rank_correlation[(b, a)]).abs() > 1e-9 {
                    return Err(ScenError::BadCorrelation("matrix must be symmetric".into()));
                }
            }
        }
        if j > 0 {
            let min_eig = min_eigenvalue(&self.rank_correlation);
            if min_eig < -1e-8 {
                return Err(ScenError::NonPsd(min_eig));
            }
        }
        for &p in &self.point_fractions {
            if !(0.0..=1.0).contains(&p) {
                return Err(ScenError::BadFraction(p));
            }
            // Interior forecasts must admit a feasible Beta.
            if p > 0.0 && p < 1.0 {
                beta_marginal(p, self.variance_coeffs)?;
            }
        }
        Ok(())
    }

    /// Pearson correlation for the Gaussian copula via the exact relation
    /// rho_P = 2 sin(pi rho_S / 6). Returns a projection note when
    /// eigenvalue clipping was needed to restore positive semidefiniteness.
    pub fn pearson_correlation(&self) -> Result<(DMatrix<f64>, Option<String>), ScenError> {
        let j = self.n_farms();
        let mut pearson = DMatrix::identity(j, j);
        for a in 0..j {
            for b in 0..j {
                if a != b {
                    let rs = self.rank_correlation[(a, b)];
                    pearson[(a, b)] = 2.0 * (std::f64::consts::PI * rs / 6.0).sin();
                }
            }
        }
        if j == 0 {
            return Ok((pearson, None));
        }
        let min_eig = min_eigenvalue(&pearson);
        if min_eig >= -1e-10 {
            return Ok((pearson, None));
        }
        if min_eig < -1e-6 {
            return Err(ScenError::NonPsd(min_eig));
        }
        // Tiny negative curvature from the conversion: clip and rescale.
        let eig = nalgebra::SymmetricEigen::new(pearson.clone());
        let clipped = DVector::from_iterator(j, eig.eigenvalues.iter().map(|&l| l.max(1e-10)));
        let mut fixed = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        for a in 0..j {
            let d = fixed[(a, a)].sqrt();
            for b in 0..j {
                fixed[(a, b)] /= d;
            }
        }
        for b in 0..j {
            let d = fixed[(b, b)].sqrt();
            for a in 0..j {
                fixed[(a, b)] /= d;
            }
        }
        let note = format!(
            "Pearson conversion left smallest eigenvalue {min_eig:.3e}; projected to the nearest PSD correlation"
        );
        Ok((fixed, Some(note)))
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Moment-matched Beta shape parameters for a per-unit point forecast.
pub fn beta_marginal(p_hat: f64, coeffs: (f64, f64, f64)) -> Result<(f64, f64), ScenError> {
    if p_hat <= 0.0 || p_hat >= 1.0 {
        return Err(ScenError::DegenerateForecast(p_hat));
    }
    let (c0, c1, c2) = coeffs;
    let variance = c0 + c1 * p_hat + c2 * p_hat * p_hat;
    let limit = p_hat * (1.0 - p_hat);
    if variance <= 0.0 || variance >= limit {
        return Err(ScenError::InfeasibleVariance {
            p_hat,
            variance,
            limit,
        });
    }
    let kappa = limit / variance - 1.0;
    Ok((p_hat * kappa, (1.0 - p_hat) * kappa))
}

/// Equiprobable wind realizations, scenario-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub farm_ids: Vec<u32>,
    /// `values[s][j]`, MW.
    pub values: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

impl ScenarioSet {
    pub fn n_scenarios(&self) -> usize {
        self.values.len()
    }

    pub fn n_farms(&self) -> usize {
        self.farm_ids.len()
    }

    pub fn total(&self, s: usize) -> f64 {
        self.values[s].iter().sum()
    }

    pub fn expected_total(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probabilities)
            .map(|(row, p)| p * row.iter().sum::<f64>())
            .sum()
    }

    pub fn validate(&self) -> Result<(), ScenError> {
        if self.values.is_empty() {
            return Err(ScenError::Empty);
        }
        let sum: f64 = self.probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ScenError::ProbabilitySum(sum));
        }
        if self.probabilities.iter().any(|&p| p <= 0.0) {
            return Err(ScenError::ProbabilitySum(sum));
        }
        Ok(())
    }

    /// A single-scenario set pinned to the given per-farm values.
    pub fn point(farm_ids: Vec<u32>, values: Vec<f64>) -> Self {
        ScenarioSet {
            farm_ids,
            values: vec![values],
            probabilities: vec![1.0],
        }
    }
}

/// Samples `count` equiprobable scenarios through the Gaussian copula.
///
/// Reproducible: identical (forecast, count, seed) inputs yield an
/// identical set bit for bit.
pub fn sample_scenarios(
    forecast: &ProbabilisticForecast,
    count: usize,
    seed: u64,
) -> Result<ScenarioSet, ScenError> {
    if count < 1 {
        return Err(ScenError::BadCount);
    }
    forecast.validate()?;
    let j = forecast.n_farms();
    let (pearson, _note) = forecast.pearson_correlation()?;
    let chol = nalgebra::Cholesky::new(pearson.clone())
        .or_else(|| {
            // Semidefinite edge (e.g. perfectly correlated farms): jitter.
            let mut m = pearson;
            for a in 0..j {
                m[(a, a)] += 1e-10;
            }
            nalgebra::Cholesky::new(m)
        })
        .ok_or_else(|| ScenError::NonPsd(f64::NAN))?;
    let lower = chol.l();

    // Marginal transforms per farm; boundary forecasts become point masses.
    enum Marginal {
        Point(f64),
        Shaped(Beta),
    }
    let mut marginals = Vec::with_capacity(j);
    for (jdx, &p) in forecast.point_fractions.iter().enumerate() {
        let cap = forecast.capacities[jdx];
        let m = if p <= 0.0 {
            Marginal::Point(0.0)
        } else if p >= 1.0 {
            Marginal::Point(cap)
        } else {
            let (a, b) = beta_marginal(p, forecast.variance_coeffs)?;
            Marginal::Shaped(Beta::new(a, b).expect("feasible shapes"))
        };
        marginals.push(m);
    }

    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(count);
    let mut g = DVector::zeros(j);
    for _ in 0..count {
        for k in 0..j {
            g[k] = StandardNormal.sample(&mut rng);
        }
        let z = &lower * &g;
        let mut row = Vec::with_capacity(j);
        for (k, marg) in marginals.iter().enumerate() {
            let w = match marg {
                Marginal::Point(v) => *v,
                Marginal::Shaped(beta) => {
                    let u = normal.cdf(z[k]).clamp(1e-12, 1.0 - 1e-12);
                    let frac = beta.inverse_cdf(u);
                    (frac * forecast.capacities[k]).clamp(0.0, forecast.capacities[k])
                }
            };
            row.push(w);
        }
        values.push(row);
    }

    let set = ScenarioSet {
        farm_ids: forecast.farm_ids.clone(),
        values,
        probabilities: vec![1.0 / count as f64; count],
    };
    set.validate()?;
    Ok(set)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Greedy fast-forward selection order (indices into the set).
pub fn fast_forward_indices(set: &ScenarioSet, target: usize) -> Result<Vec<usize>, ScenError> {
    let s = set.n_scenarios();
    if target < 1 || target > s {
        return Err(ScenError::BadTarget {
            target,
            available: s,
        });
    }
    let dist: Vec<Vec<f64>> = (0..s)
        .map(|a| (0..s).map(|b| distance(&set.values[a], &set.values[b])).collect())
        .collect();

    let mut selected: Vec<usize> = Vec::with_capacity(target);
    // Probability-weighted distance to the selected set, per scenario.
    let mut best_d = vec![f64::INFINITY; s];
    while selected.len() < target {
        let mut pick: Option<(usize, f64)> = None;
        for u in 0..s {
            if selected.contains(&u) {
                continue;
            }
            let mut obj = 0.0;
            for v in 0..s {
                if v == u || selected.contains(&v) {
                    continue;
                }
                obj += set.probabilities[v] * best_d[v].min(dist[v][u]);
            }
            let better = match pick {
                None => true,
                Some((_, best)) => obj < best - 1e-15,
            };
            if better {
                pick = Some((u, obj));
            }
        }
        let (u, _) = pick.expect("at least one unselected scenario");
        selected.push(u);
        for v in 0..s {
            best_d[v] = best_d[v].min(dist[v][u]);
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Fast-forward reduction with probability reassignment to the nearest
/// selected scenario (ties to the lowest selected index).
pub fn fast_forward_reduce(set: &ScenarioSet, target: usize) -> Result<ScenarioSet, ScenError> {
    set.validate()?;
    let selected = fast_forward_indices(set, target)?;
    let mut probs: Vec<f64> = selected.iter().map(|&u| set.probabilities[u]).collect();
    for v in 0..set.n_scenarios() {
        if selected.contains(&v) {
            continue;
        }
        let mut nearest = 0usize;
        let mut nd = f64::INFINITY;
        for (k, &u) in selected.iter().enumerate() {
            let d = distance(&set.values[v], &set.values[u]);
            if d < nd - 1e-15 {
                nd = d;
                nearest = k;
            }
        }
        probs[nearest] += set.probabilities[v];
    }
    let out = ScenarioSet {
        farm_ids: set.farm_ids.clone(),
        values: selected.iter().map(|&u| set.values[u].clone()).collect(),
        probabilities: probs,
    };
    out.validate()?;
    Ok(out)
}

/// Probability-weighted distance of dropped scenarios to the kept set;
/// the quantity the greedy selection minimizes (test oracle hook).
pub fn reduction_objective(set: &ScenarioSet, kept: &[usize]) -> f64 {
    let mut obj = 0.0;
    for v in 0..set.n_scenarios() {
        if kept.contains(&v) {
            continue;
        }
        let d = kept
            .iter()
            .map(|&u| distance(&set.values[v], &set.values[u]))
            .fold(f64::INFINITY, f64::min);
        obj += set.probabilities[v] * d;
    }
    obj
}

/// Empirical lower-stair inverse CDF of total wind power.
fn empirical_total_quantile(set: &ScenarioSet, q: f64) -> f64 {
    let mut totals: Vec<(f64, f64)> = (0..set.n_scenarios())
        .map(|s| (set.total(s), set.probabilities[s]))
        .collect();
    totals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut cum = 0.0;
    for (t, p) in &totals {
        cum += p;
        if cum >= q - 1e-12 {
            return *t;
        }
    }
    totals.last().map(|(t, _)| *t).unwrap_or(0.0)
}

/// Deterministic up/down reserve requirements from the tails of the total
/// wind distribution, both clamped at zero.
pub fn deterministic_requirements(set: &ScenarioSet, q: f64) -> Result<(f64, f64), ScenError> {
    if !(0.0 < q && q < 0.5) {
        return Err(ScenError::BadQuantile(q));
    }
    set.validate()?;
    let expected = set.expected_total();
    let lo = empirical_total_quantile(set, q);
    let hi = empirical_total_quantile(set, 1.0 - q);
    Ok(((expected - lo).max(0.0), (hi - expected).max(0.0)))
}

/// Sample Spearman rank correlation between two value series.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx).powi(2);
        vy += (ry[i] - my).powi(2);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Columnar scenario file: header `farm_ids,<ids...>`, then one row per
/// scenario `s,pi,W_1..W_J`. Floats carry 17 significant digits so the
/// round trip is exact.
pub fn write_scenario_file(set: &ScenarioSet) -> String {
    let mut out = String::from("farm_ids");
    for id in &set.farm_ids {
        out.push_str(&format!(",{id}"));
    }
    out.push('\n');
    for s in 0..set.n_scenarios() {
        out.push_str(&format!("{},{:.16e}", s + 1, set.probabilities[s]));
        for v in &set.values[s] {
            out.push_str(&format!(",{:.16e}", v));
        }
        out.push('\n');
    }
    out
}

pub fn parse_scenario_file(text: &str) -> Result<ScenarioSet, ScenError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(ScenError::Empty)?;
    let mut cols = header.split(',');
    if cols.next() != Some("farm_ids") {
        return Err(ScenError::File {
            line: 1,
            msg: "expected header starting with `farm_ids`".into(),
        });
    }
    let farm_ids: Vec<u32> = cols
        .map(|c| {
            c.trim().parse().map_err(|_| ScenError::File {
                line: 1,
                msg: format!("bad farm id `{c}`"),
            })
        })
        .collect::<Result<_, _>>()?;
    let j = farm_ids.len();

    let mut values = Vec::new();
    let mut probabilities = Vec::new();
    for (ln, raw) in lines {
        let line = ln + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != j + 2 {
            return Err(ScenError::File {
                line,
                msg: format!("expected {} fields, got {}", j + 2, fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64, ScenError> {
            s.trim().parse().map_err(|_| ScenError::File {
                line,
                msg: format!("bad number `{s}`"),
            })
        };
        probabilities.push(parse(fields[1])?);
        values.push(
            fields[2..]
                .iter()
                .map(|f| parse(f))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    let set = ScenarioSet {
        farm_ids,
        values,
        probabilities,
    };
    set.validate()?;
    Ok(set)
}
