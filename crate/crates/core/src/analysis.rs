//! Neighbourhood statistics, class-separation scores and bounds used to
//! study how informative neighbour feature distributions are.
//!
//! Variances and moments use population (`1/n`) denominators. Missing
//! values (nodes without neighbours) are `NaN`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabelVector, SparseGraph};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatisticKind {
    Mean,
    Variance,
    Skewness,
    OriginMoment(u32),
    CentralMoment(u32),
    /// Central moment divided by `σ^k`; `k >= 3`.
    StandardizedMoment(u32),
}

impl StatisticKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StatisticKind::OriginMoment(0) | StatisticKind::CentralMoment(0) => {
                Err(Error::InvalidArgument("moment order must be >= 1".into()))
            }
            StatisticKind::StandardizedMoment(k) if k < 3 => Err(Error::InvalidArgument(format!(
                "standardized moment order {k} must be >= 3"
            ))),
            _ => Ok(()),
        }
    }

    /// Evaluates the statistic on one multiset of values. Empty input gives
    /// `NaN`; a zero-variance sample has zero standardized moments.
    pub fn evaluate(&self, xs: &[f64]) -> f64 {
        if xs.is_empty() {
            return f64::NAN;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let central = |k: i32| xs.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
        let standardized = |k: i32| {
            let var = central(2);
            if var <= 0.0 {
                0.0
            } else {
                central(k) / var.powf(k as f64 / 2.0)
            }
        };
        match *self {
            StatisticKind::Mean => mean,
            StatisticKind::Variance => central(2),
            StatisticKind::Skewness => standardized(3),
            StatisticKind::OriginMoment(k) => xs.iter().map(|x| x.powi(k as i32)).sum::<f64>() / n,
            StatisticKind::CentralMoment(k) => central(k as i32),
            StatisticKind::StandardizedMoment(k) => standardized(k as i32),
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticKind::Mean => f.write_str("mean"),
            StatisticKind::Variance => f.write_str("variance"),
            StatisticKind::Skewness => f.write_str("skewness"),
            StatisticKind::OriginMoment(k) => write!(f, "origin{k}"),
            StatisticKind::CentralMoment(k) => write!(f, "central{k}"),
            StatisticKind::StandardizedMoment(k) => write!(f, "standardized{k}"),
        }
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let order = |rest: &str| {
            rest.parse::<u32>()
                .map_err(|_| Error::InvalidArgument(format!("bad statistic `{s}`")))
        };
        let kind = match s {
            "mean" => StatisticKind::Mean,
            "variance" => StatisticKind::Variance,
            "skewness" => StatisticKind::Skewness,
            _ if s.starts_with("origin") => StatisticKind::OriginMoment(order(&s[6..])?),
            _ if s.starts_with("central") => StatisticKind::CentralMoment(order(&s[7..])?),
            _ if s.starts_with("standardized") => StatisticKind::StandardizedMoment(order(&s[12..])?),
            _ => return Err(Error::InvalidArgument(format!("unknown statistic `{s}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Per-node statistic of the neighbour values in column `dim`.
pub fn neighborhood_statistic(graph: &SparseGraph, x: &Matrix, dim: usize, kind: StatisticKind) -> Result<Vec<f64>> {
    kind.validate()?;
    if x.rows() != graph.num_nodes() {
        return Err(Error::shape(
            "neighborhood_statistic",
            format!("{} rows for {} nodes", x.rows(), graph.num_nodes()),
        ));
    }
    if dim >= x.cols() {
        return Err(Error::IndexOutOfRange(format!("feature column {dim} of {}", x.cols())));
    }
    let mut buf = Vec::new();
    Ok((0..graph.num_nodes())
        .map(|v| {
            buf.clear();
            buf.extend(graph.neighbors(v).iter().map(|&u| x.get(u, dim)));
            kind.evaluate(&buf)
        })
        .collect())
}

/// Non-missing values grouped by class.
fn by_class(values: &[f64], labels: &LabelVector) -> Result<Vec<Vec<f64>>> {
    if values.len() != labels.len() {
        return Err(Error::shape(
            "class grouping",
            format!("{} values for {} labels", values.len(), labels.len()),
        ));
    }
    let mut groups = vec![Vec::new(); labels.num_classes()];
    for (&v, &c) in values.iter().zip(labels.as_slice()) {
        if !v.is_nan() {
            groups[c].push(v);
        }
    }
    Ok(groups)
}

/// Sum over class pairs of `(μ_i − μ_j)² / (σ_i² + σ_j²)`. Pairs are
/// unordered unless `ordered_pairs`, which doubles the sum. A pair with
/// equal means contributes 0; a pair with distinct means and zero spread
/// gives `+∞`.
pub fn fisher_index(values: &[f64], labels: &LabelVector, ordered_pairs: bool) -> Result<f64> {
    let groups = by_class(values, labels)?;
    let stats: Vec<(f64, f64)> = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| (StatisticKind::Mean.evaluate(g), StatisticKind::Variance.evaluate(g)))
        .collect();
    let populated = groups.iter().filter(|g| g.len() >= 2).count();
    if populated < 2 {
        return Err(Error::InvalidArgument(
            "fisher_index needs at least 2 classes with 2 or more samples".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..stats.len() {
        for j in i + 1..stats.len() {
            let num = (stats[i].0 - stats[j].0).powi(2);
            let den = stats[i].1 + stats[j].1;
            let term = if num == 0.0 {
                0.0
            } else if den == 0.0 {
                log::warn!("fisher_index: zero within-class spread with distinct means");
                f64::INFINITY
            } else {
                num / den
            };
            total += term;
        }
    }
    Ok(if ordered_pairs { 2.0 * total } else { total })
}

/// Bin index of each value under equal-frequency binning: bin edges are
/// the sorted values at positions `⌊b·n/bins⌋`, `b = 1..bins-1`, and a
/// value's bin is the number of edges not exceeding it.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let edges: Vec<f64> = (1..bins).map(|b| sorted[b * n / bins]).collect();
    values.iter().map(|&v| edges.partition_point(|&e| e <= v)).collect()
}

/// Plug-in mutual information (nats) between the equal-frequency binned
/// `values` and the labels. Missing values are dropped first.
pub fn mutual_information(values: &[f64], labels: &LabelVector, bins: usize) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::shape(
            "mutual_information",
            format!("{} values for {} labels", values.len(), labels.len()),
        ));
    }
    if bins < 1 {
        return Err(Error::InvalidArgument("bins must be >= 1".into()));
    }
    let (vals, classes): (Vec<f64>, Vec<usize>) = values
        .iter()
        .zip(labels.as_slice())
        .filter(|(v, _)| !v.is_nan())
        .map(|(&v, &c)| (v, c))
        .unzip();
    if vals.len() < 2 * bins {
        return Err(Error::InvalidArgument(format!(
            "mutual_information needs at least {} samples, got {}",
            2 * bins,
            vals.len()
        )));
    }
    let binned = equal_frequency_bins(&vals, bins);
    let c = labels.num_classes();
    let mut joint = vec![0usize; bins * c];
    for (&b, &y) in binned.iter().zip(&classes) {
        joint[b * c + y] += 1;
    }
    let n = vals.len() as f64;
    let pb: Vec<f64> = (0..bins)
        .map(|b| joint[b * c..(b + 1) * c].iter().sum::<usize>() as f64 / n)
        .collect();
    let pc: Vec<f64> = (0..c)
        .map(|y| (0..bins).map(|b| joint[b * c + y]).sum::<usize>() as f64 / n)
        .collect();
    let mut mi = 0.0;
    for b in 0..bins {
        for y in 0..c {
            let count = joint[b * c + y];
            if count > 0 {
                let p = count as f64 / n;
                mi += p * (p / (pb[b] * pc[y])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityConfig {
    pub p: f64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self { p: 2.0 }
    }
}

/// `Γ = (1/|C|) Σ_i max_{j≠i} (S_i + S_j) / M_ij` with
/// `S_i = (E‖h − μ_i‖_p^p)^{1/p}` and `M_ij = ‖μ_i − μ_j‖_p`. Any
/// coincident pair of class means gives `+∞`.
pub fn complexity_measure(h: &Matrix, labels: &LabelVector, cfg: &ComplexityConfig) -> Result<f64> {
    if !(cfg.p >= 1.0 && cfg.p.is_finite()) {
        return Err(Error::InvalidArgument(format!("norm order p = {} must be >= 1", cfg.p)));
    }
    if h.rows() != labels.len() {
        return Err(Error::shape(
            "complexity_measure",
            format!("{} rows for {} labels", h.rows(), labels.len()),
        ));
    }
    let c = labels.num_classes();
    if c < 2 {
        return Err(Error::InvalidArgument("complexity_measure needs >= 2 classes".into()));
    }
    let d = h.cols();
    let counts = labels.class_counts();
    let mut means = Matrix::zeros(c, d);
    for (r, &y) in labels.as_slice().iter().enumerate() {
        for (m, &v) in means.row_mut(y).iter_mut().zip(h.row(r)) {
            *m += v;
        }
    }
    for (y, &n) in counts.iter().enumerate() {
        for m in means.row_mut(y) {
            *m /= n as f64;
        }
    }
    let p = cfg.p;
    let mut spread = vec![0.0; c];
    for (r, &y) in labels.as_slice().iter().enumerate() {
        spread[y] += h
            .row(r)
            .iter()
            .zip(means.row(y))
            .map(|(a, b)| (a - b).abs().powf(p))
            .sum::<f64>();
    }
    let s: Vec<f64> = spread
        .iter()
        .zip(&counts)
        .map(|(t, &n)| (t / n as f64).powf(1.0 / p))
        .collect();
    let mut total = 0.0;
    for i in 0..c {
        let mut worst = f64::NEG_INFINITY;
        for j in (0..c).filter(|&j| j != i) {
            let m = means
                .row(i)
                .iter()
                .zip(means.row(j))
                .map(|(a, b)| (a - b).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p);
            if m == 0.0 {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((s[i] + s[j]) / m);
        }
        total += worst;
    }
    Ok(total / c as f64)
}

/// Remainder bound after truncating a moment expansion at order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBound {
    pub epsilon: f64,
    pub c: f64,
    pub k: u32,
}

/// `(ε·c)^{k+1} / (k+1)!`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn deviation_bound(b: &DeviationBound) -> Result<f64> {
    if !(b.c > 0.0) {
        return Err(Error::InvalidArgument("c must be > 0".into()));
    }
    if b.k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if !(b.epsilon >= 0.0) {
        return Err(Error::InvalidArgument("epsilon must be >= 0".into()));
    }
    let x = b.epsilon * b.c;
    // Accumulate x^j / j! term by term to stay finite for large k.
    Ok((1..=b.k + 1).fold(1.0, |acc, j| acc * x / j as f64))
}

/// Mean attention per layer and order: `att[l][k]` is an `n × D` matrix
/// and the result is `layers × K`.
pub fn attention_summary(att: &[Vec<Matrix>]) -> Result<Matrix> {
    let layers = att.len();
    let orders = att.first().map_or(0, Vec::len);
    if layers == 0 || orders == 0 {
        return Err(Error::InvalidArgument("no attention weights to summarise".into()));
    }
    let mut out = Matrix::zeros(layers, orders);
    for (l, per_order) in att.iter().enumerate() {
        if per_order.len() != orders {
            return Err(Error::shape(
                "attention_summary",
                "layers disagree on the number of orders",
            ));
        }
        for (k, a) in per_order.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::shape("attention_summary", "empty attention matrix"));
            }
            out.set(l, k, a.sum() / a.len() as f64);
        }
    }
    Ok(out)
}

/// `score(statistic, column)` for every statistic and feature column,
/// computed in parallel over columns. Returns `kinds × D`.
pub fn statistic_grid(
    graph: &SparseGraph,
    x: &Matrix,
    kinds: &[StatisticKind],
    score: impl Fn(&[f64]) -> Result<f64> + Sync,
) -> Result<Matrix> {
    let cols: Vec<Vec<f64>> = (0..x.cols())
        .into_par_iter()
        .map(|d| {
            kinds
                .iter()
                .map(|&k| neighborhood_statistic(graph, x, d, k).and_then(|v| score(&v)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_fn(kinds.len(), x.cols(), |k, d| cols[d][k]))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn star(values: &[f64]) -> (SparseGraph, Matrix) {
        let n = values.len() + 1;
        let g = SparseGraph::from_edges(n, (1..n).map(|v| (0, v))).unwrap();
        let mut x = vec![0.0];
        x.extend_from_slice(values);
        (g, Matrix::from_vec(n, 1, x).unwrap())
    }

    fn stat(values: &[f64], kind: StatisticKind) -> f64 {
        let (g, x) = star(values);
        neighborhood_statistic(&g, &x, 0, kind).unwrap()[0]
    }

    #[test]
    fn two_point_neighbourhood() {
        assert_eq!(stat(&[1.0, 3.0], StatisticKind::Mean), 2.0);
        assert_eq!(stat(&[1.0, 3.0], StatisticKind::Variance), 1.0);
        assert_eq!(stat(&[1.0, 3.0], StatisticKind::Skewness), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn skewed_three_point_neighbourhood() {
        let v = [0.0, 0.0, 3.0];
        assert_eq!(stat(&v, StatisticKind::Mean), 1.0);
        assert!((stat(&v, StatisticKind::Variance) - 2.0).abs() < 1e-15);
        let expect = ((-1.0f64).powi(3) * 2.0 + 8.0) / (3.0 * 2.0f64.powf(1.5));
        assert!((stat(&v, StatisticKind::Skewness) - expect).abs() < 1e-12);
        assert!((expect - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn single_and_missing_neighbourhoods() {
        assert_eq!(stat(&[4.0], StatisticKind::Variance), 0.0);
        assert_eq!(stat(&[4.0], StatisticKind::Skewness), 0.0);
        assert_eq!(stat(&[2.0, 2.0, 2.0], StatisticKind::StandardizedMoment(4)), 0.0);
        let g = SparseGraph::from_edges(3, [(0, 1)]).unwrap();
        let x = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let s = neighborhood_statistic(&g, &x, 0, StatisticKind::Mean).unwrap();
        assert!(s[2].is_nan());
        assert!(neighborhood_statistic(&g, &x, 1, StatisticKind::Mean).is_err());
    }

    #[test]
    fn statistic_names_round_trip() {
        for k in [
            StatisticKind::Mean,
            StatisticKind::Variance,
            StatisticKind::Skewness,
            StatisticKind::OriginMoment(2),
            StatisticKind::CentralMoment(3),
            StatisticKind::StandardizedMoment(4),
        ] {
            assert_eq!(k.to_string().parse::<StatisticKind>().unwrap(), k);
        }
        assert!("standardized2".parse::<StatisticKind>().is_err());
    }

    #[test]
    fn fisher_examples() {
        let labels = LabelVector::from_labels(vec![0, 0, 1, 1]).unwrap();
        assert_eq!(fisher_index(&[0.0, 2.0, 4.0, 6.0], &labels, false).unwrap(), 8.0);
        assert_eq!(fisher_index(&[0.0, 2.0, 4.0, 6.0], &labels, true).unwrap(), 16.0);
        assert_eq!(fisher_index(&[0.0, 2.0, 0.0, 2.0], &labels, false).unwrap(), 0.0);
        assert_eq!(fisher_index(&[1.0, 1.0, 1.0, 1.0], &labels, false).unwrap(), 0.0);
        assert_eq!(
            fisher_index(&[1.0, 1.0, 2.0, 2.0], &labels, false).unwrap(),
            f64::INFINITY
        );

        let three = LabelVector::from_labels(vec![0, 0, 1, 1, 2, 2]).unwrap();
        let v = [0.0, 2.0, 0.0, 2.0, 4.0, 6.0];
        // Pairs (0,1) = 0, (0,2) = 8, (1,2) = 8.
        assert_eq!(fisher_index(&v, &three, false).unwrap(), 16.0);

        let single = LabelVector::from_labels(vec![0, 1, 1]).unwrap();
        assert!(fisher_index(&[0.0, 1.0, 2.0], &single, false).is_err());
    }

    #[test]
    fn fisher_is_affine_invariant() {
        let mut rng = SeedTree::new(3).stream("fisher");
        let labels = LabelVector::from_labels((0..60).map(|i| i % 3).collect()).unwrap();
        let v: Vec<f64> = (0..60).map(|i| (i % 3) as f64 + rng.random_range(-1.0..1.0)).collect();
        let base = fisher_index(&v, &labels, false).unwrap();
        for (a, b) in [(2.5, -3.0), (-0.3, 10.0)] {
            let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let f = fisher_index(&w, &labels, false).unwrap();
            assert!((f - base).abs() <= 1e-9 * base.max(1.0));
        }
    }

    #[test]
    fn mutual_information_examples() {
        let labels = LabelVector::from_labels((0..64).map(|i| i % 2).collect()).unwrap();
        let constant = vec![3.0; 64];
        assert_eq!(mutual_information(&constant, &labels, 16).unwrap(), 0.0);
        let same: Vec<f64> = labels.as_slice().iter().map(|&c| c as f64).collect();
        let mi = mutual_information(&same, &labels, 2).unwrap();
        assert!((mi - 2f64.ln()).abs() < 1e-12);
        assert!(mutual_information(&same[..], &labels, 40).is_err());
    }

    #[test]
    fn mutual_information_is_bounded() {
        let mut rng = SeedTree::new(4).stream("mi");
        for trial in 0..20 {
            let c = 2 + trial % 4;
            let labels = LabelVector::from_labels((0..200).map(|i| i % c).collect()).unwrap();
            let v: Vec<f64> = labels
                .as_slice()
                .iter()
                .map(|&y| y as f64 * rng.random_range(0.0..2.0) + rng.random_range(-1.0..1.0))
                .collect();
            let bins = 4 + trial % 13;
            let mi = mutual_information(&v, &labels, bins).unwrap();
            let cap = (bins as f64).ln().min((c as f64).ln());
            assert!(mi >= 0.0 && mi <= cap + 1e-9, "{mi} > {cap}");
        }
    }

    #[test]
    fn equal_frequency_bins_are_balanced() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b = equal_frequency_bins(&v, 4);
        for bin in 0..4 {
            assert_eq!(b.iter().filter(|&&x| x == bin).count(), 25);
        }
    }

    /// Mutual information of a balanced two-component unit-variance Gaussian
    /// mixture with means `0` and `delta`, by trapezoidal quadrature.
    fn gaussian_mixture_mi(delta: f64) -> f64 {
        let pdf = |x: f64, m: f64| (-(x - m).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let (lo, hi, steps) = (-10.0, delta + 10.0, 200_000);
        let h = (hi - lo) / steps as f64;
        let mut total = 0.0;
        for i in 0..=steps {
            let x = lo + i as f64 * h;
            let (p0, p1) = (pdf(x, 0.0), pdf(x, delta));
            let mix = 0.5 * (p0 + p1);
            let mut f = 0.0;
            for p in [p0, p1] {
                if p > 0.0 {
                    f += 0.5 * p * (p / mix).ln();
                }
            }
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            total += w * f;
        }
        total * h
    }

    #[test]
    fn mutual_information_tracks_gaussian_mixture_oracle() {
        let delta = 2.0;
        let oracle = gaussian_mixture_mi(delta);
        let mut rng = SeedTree::new(5).stream("mixture");
        let normal = Normal::new(0.0, 1.0).unwrap();
        let labels: Vec<usize> = (0..10_000).map(|i| i % 2).collect();
        let v: Vec<f64> = labels
            .iter()
            .map(|&y| y as f64 * delta + normal.sample(&mut rng))
            .collect();
        let labels = LabelVector::from_labels(labels).unwrap();
        let mi = mutual_information(&v, &labels, 16).unwrap();
        assert!((mi - oracle).abs() <= 0.1 * oracle, "estimate {mi}, oracle {oracle}");
    }

    #[test]
    fn complexity_examples() {
        let labels = LabelVector::from_labels(vec![0, 0, 1, 1]).unwrap();
        let h = Matrix::from_rows(&[[0.0, 0.0], [0.0, 2.0], [4.0, 0.0], [4.0, 2.0]]).unwrap();
        let cfg = ComplexityConfig::default();
        assert!((complexity_measure(&h, &labels, &cfg).unwrap() - 0.5).abs() < 1e-15);

        let same = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0], [1.0, 0.0], [1.0, 2.0]]).unwrap();
        assert_eq!(complexity_measure(&same, &labels, &cfg).unwrap(), f64::INFINITY);

        let points = LabelVector::from_labels(vec![0, 1]).unwrap();
        let h = Matrix::from_rows(&[[0.0, 1.0], [3.0, 1.0]]).unwrap();
        assert_eq!(complexity_measure(&h, &points, &cfg).unwrap(), 0.0);

        assert!(complexity_measure(&h, &points, &ComplexityConfig { p: 0.5 }).is_err());
    }

    #[test]
    fn complexity_is_translation_and_scale_invariant() {
        let mut rng = SeedTree::new(6).stream("gamma");
        let labels = LabelVector::from_labels((0..30).map(|i| i % 3).collect()).unwrap();
        let h = Matrix::from_fn(30, 4, |i, _| (i % 3) as f64 + rng.random_range(-1.0..1.0));
        for p in [1.0, 2.0, 3.0] {
            let cfg = ComplexityConfig { p };
            let base = complexity_measure(&h, &labels, &cfg).unwrap();
            let shifted = h.map(|v| v + 7.5);
            let scaled = h.map(|v| 3.25 * v);
            for other in [shifted, scaled] {
                let g = complexity_measure(&other, &labels, &cfg).unwrap();
                assert!((g - base).abs() <= 1e-9 * base, "p={p}: {g} vs {base}");
            }
        }
    }

    #[test]
    fn deviation_bound_examples() {
        let b = |epsilon, k| deviation_bound(&DeviationBound { epsilon, c: 1.0, k }).unwrap();
        assert!((b(0.1, 3) - 1e-4 / 24.0).abs() < 1e-18);
        assert_eq!(b(0.0, 4), 0.0);
        assert!(b(0.5, 5) < b(0.5, 2));
        for k in 1..20 {
            assert!(b(0.9, k + 1) < b(0.9, k));
        }
        assert!(deviation_bound(&DeviationBound {
            epsilon: 0.1,
            c: 0.0,
            k: 2
        })
        .is_err());
        assert!(deviation_bound(&DeviationBound {
            epsilon: 0.1,
            c: 1.0,
            k: 0
        })
        .is_err());
    }

    #[test]
    fn attention_summary_examples() {
        let half = vec![vec![Matrix::filled(5, 3, 0.5); 3]; 2];
        let s = attention_summary(&half).unwrap();
        assert!(s.as_slice().iter().all(|&v| v == 0.5));

        let one = vec![vec![Matrix::filled(1, 1, 0.25)]];
        assert_eq!(attention_summary(&one).unwrap().get(0, 0), 0.25);

        let mut rng = SeedTree::new(7).stream("att");
        let att: Vec<Vec<Matrix>> = (0..2)
            .map(|_| (0..3).map(|_| Matrix::from_fn(4, 2, |_, _| rng.random())).collect())
            .collect();
        let s = attention_summary(&att).unwrap();
        for l in 0..2 {
            for k in 0..3 {
                let mut total = 0.0;
                for i in 0..4 {
                    for d in 0..2 {
                        total += att[l][k].get(i, d);
                    }
                }
                assert!((s.get(l, k) - total / 8.0).abs() < 1e-15);
            }
        }
        assert!(attention_summary(&[]).is_err());
    }
}
