//! The configuration distribution: per-node maliciousness means and their
//! covariance, plus synthesis, perturbation, sampling and CSV ingestion.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{Matrix, RngStream, Vector};

/// Largest magnitude a covariance between two Bernoulli variables can take.
pub const BERNOULLI_COV_BOUND: f64 = 0.25;

/// Mean `μ` and covariance `Σ` of the configuration distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MaliciousnessModel {
    mu: Vector,
    sigma: Matrix,
    independent: bool,
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("{what} {p} outside [0, 1]")));
    }
    Ok(())
}

impl MaliciousnessModel {
    /// Independent Bernoulli nodes: `Σ = diag(μ_i (1 - μ_i))`.
    pub fn independent(mu: Vector) -> Result<Self> {
        for &p in mu.iter() {
            check_probability(p, "probability")?;
        }
        let sigma = Matrix::from_diagonal(&mu.map(|p| p * (1.0 - p)));
        Ok(Self {
            mu,
            sigma,
            independent: true,
        })
    }

    /// A general model with an explicit covariance.
    pub fn with_covariance(mu: Vector, sigma: Matrix) -> Result<Self> {
        let n = mu.len();
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: sigma.nrows(),
            });
        }
        for &p in mu.iter() {
            check_probability(p, "probability")?;
        }
        for i in 0..n {
            for j in 0..n {
                let s = sigma[(i, j)];
                if !s.is_finite() || s.abs() > BERNOULLI_COV_BOUND + 1e-12 {
                    return Err(Error::Domain(format!(
                        "covariance entry ({i}, {j}) = {s} exceeds the Bernoulli bound"
                    )));
                }
                if (s - sigma[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotSymmetric((s - sigma[(j, i)]).abs()));
                }
            }
        }
        Ok(Self {
            mu,
            sigma,
            independent: false,
        })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn is_independent(&self) -> bool {
        self.independent
    }

    /// `E[π_i π_j] = Σ_ij + μ_i μ_j`.
    pub fn expected_product(&self, i: usize, j: usize) -> f64 {
        self.sigma[(i, j)] + self.mu[i] * self.mu[j]
    }
}

/// A realized labelling: `pi[i] == 1` marks node `i` malicious.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration(Vec<u8>);

impl Configuration {
    pub fn new(pi: Vec<u8>) -> Result<Self> {
        if let Some(bad) = pi.iter().find(|&&x| x > 1) {
            return Err(Error::Domain(format!("configuration entry {bad} not in {{0, 1}}")));
        }
        Ok(Self(pi))
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn malicious_count(&self) -> usize {
        self.0.iter().filter(|&&x| x == 1).count()
    }

    /// The degenerate model putting all mass on this configuration.
    pub fn to_model(&self) -> MaliciousnessModel {
        MaliciousnessModel::independent(Vector::from_iterator(
            self.0.len(),
            self.0.iter().map(|&x| x as f64),
        ))
        .expect("binary entries are valid probabilities")
    }
}

/// Parameters of a Beta score distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    fn distribution(&self) -> Result<Beta<f64>> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.alpha > 0.0 && self.beta > 0.0)
        {
            return Err(Error::invalid(format!(
                "Beta({}, {}) needs positive finite parameters",
                self.alpha, self.beta
            )));
        }
        Beta::new(self.alpha, self.beta).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Marks `⌊frac·N⌋` uniformly chosen nodes malicious and draws every node's
/// probability from the Beta distribution of its true class.
pub fn synthetic_assign(
    g: &Graph,
    malicious_frac: f64,
    benign: BetaParams,
    malicious: BetaParams,
    seed: u64,
) -> Result<(MaliciousnessModel, Configuration)> {
    if !(0.0..=1.0).contains(&malicious_frac) {
        return Err(Error::invalid(format!(
            "malicious fraction {malicious_frac} outside [0, 1]"
        )));
    }
    benign.distribution()?;
    malicious.distribution()?;
    let n = g.n();
    let count = ((malicious_frac * n as f64) + 1e-9).floor() as usize;
    let root = RngStream::new(seed);
    let mut pick = root.split(0);
    let mut pi = vec![0u8; n];
    for i in rand::seq::index::sample(&mut pick, n, count.min(n)) {
        pi[i] = 1;
    }
    let truth = Configuration::new(pi)?;
    let model = synthetic_probabilities(&truth, benign, malicious, root.split(1))?;
    Ok((model, truth))
}

/// Draws an independent model around a fixed ground truth: node `i` gets a
/// probability from `malicious` if `truth[i] == 1`, else from `benign`.
pub fn synthetic_probabilities(
    truth: &Configuration,
    benign: BetaParams,
    malicious: BetaParams,
    mut stream: RngStream,
) -> Result<MaliciousnessModel> {
    let bd = benign.distribution()?;
    let md = malicious.distribution()?;
    let mu = Vector::from_iterator(
        truth.len(),
        truth.as_slice().iter().map(|&t| {
            let p: f64 = if t == 1 {
                md.sample(&mut stream)
            } else {
                bd.sample(&mut stream)
            };
            p.clamp(0.0, 1.0)
        }),
    );
    MaliciousnessModel::independent(mu)
}

/// Adds i.i.d. `N(0, sigma_noise)` noise to every mean and clamps to [0, 1].
///
/// Independent models get their covariance rebuilt from the noisy means;
/// general models keep their covariance.
pub fn perturb(model: &MaliciousnessModel, sigma_noise: f64, seed: u64) -> Result<MaliciousnessModel> {
    if !(sigma_noise >= 0.0 && sigma_noise.is_finite()) {
        return Err(Error::invalid(format!("noise level {sigma_noise} must be >= 0")));
    }
    if sigma_noise == 0.0 {
        return Ok(model.clone());
    }
    let mut rng = RngStream::new(seed);
    let mu = model.mu.map(|p| {
        let z: f64 = StandardNormal.sample(&mut rng);
        (p + sigma_noise * z).clamp(0.0, 1.0)
    });
    if model.independent {
        MaliciousnessModel::independent(mu)
    } else {
        Ok(MaliciousnessModel {
            mu,
            sigma: model.sigma.clone(),
            independent: false,
        })
    }
}

/// Draws `π_i ~ Bernoulli(μ_i)` independently.
pub fn sample_configuration(model: &MaliciousnessModel, seed: u64) -> Result<Configuration> {
    if !model.independent {
        return Err(Error::UnsupportedDistribution(
            "sampling is only implemented for independent nodes".into(),
        ));
    }
    let mut rng = RngStream::new(seed);
    let pi = model
        .mu
        .iter()
        .map(|&p| u8::from(rng.random::<f64>() < p))
        .collect();
    Configuration::new(pi)
}

/// Probabilities (and optional labels) read from CSV, ordered by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub mu: Vector,
    pub labels: Option<Vec<u8>>,
}

/// Parses `id,p[,label]` rows (with a header line) covering ids `0..N`.
pub fn load_probabilities(text: &str) -> Result<ProbabilityTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let width = reader
        .headers()
        .map_err(|e| Error::parse(1, format!("unreadable header: {e}")))?
        .len();
    if width != 2 && width != 3 {
        return Err(Error::parse(
            1,
            format!("expected columns id,p[,label], found {width}"),
        ));
    }
    let has_labels = width == 3;

    let mut rows: Vec<(usize, f64, Option<u8>, usize)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record[0]
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("invalid node id {:?}", &record[0])))?;
        let p = record[1]
            .parse::<f64>()
            .map_err(|_| Error::parse(line, format!("invalid probability {:?}", &record[1])))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::parse(line, format!("probability {p} outside [0, 1]")));
        }
        let label = if has_labels {
            match &record[2] {
                "0" => Some(0),
                "1" => Some(1),
                other => return Err(Error::parse(line, format!("label {other:?} not in {{0, 1}}"))),
            }
        } else {
            None
        };
        rows.push((id, p, label, line));
    }
    if rows.is_empty() {
        return Err(Error::parse(1, "no probability rows"));
    }
    let n = rows.len();
    let mut slot: Vec<Option<(f64, Option<u8>)>> = vec![None; n];
    for &(id, p, label, line) in &rows {
        if id >= n {
            return Err(Error::parse(
                line,
                format!("node id {id} out of range; ids must cover 0..{n}"),
            ));
        }
        if slot[id].is_some() {
            return Err(Error::parse(line, format!("duplicate node id {id}")));
        }
        slot[id] = Some((p, label));
    }
    // n rows, all ids < n, no duplicates: every slot is filled.
    let filled: Vec<(f64, Option<u8>)> = slot.into_iter().flatten().collect();
    let mu = Vector::from_iterator(n, filled.iter().map(|r| r.0));
    let labels = has_labels.then(|| filled.iter().map(|r| r.1.unwrap_or(0)).collect());
    Ok(ProbabilityTable { mu, labels })
}

/// 17 significant digits in positional notation.
pub fn format_probability(p: f64) -> String {
    if p == 0.0 {
        return "0.0000000000000000".to_string();
    }
    let sci = format!("{p:e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    let decimals = (16 - exp).max(0) as usize;
    format!("{p:.decimals$}")
}

/// Inverse of [`load_probabilities`].
pub fn write_probabilities(mu: &Vector, labels: Option<&[u8]>) -> String {
    let mut out = String::from(if labels.is_some() { "id,p,label\n" } else { "id,p\n" });
    for (i, &p) in mu.iter().enumerate() {
        out.push_str(&i.to_string());
        out.push(',');
        out.push_str(&format_probability(p));
        if let Some(l) = labels {
            out.push(',');
            out.push_str(&l[i].to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::barabasi_albert;

    #[test]
    fn independent_covariances() {
        let m = MaliciousnessModel::independent(Vector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(m.sigma(), &Matrix::zeros(3, 3));
        let m = MaliciousnessModel::independent(Vector::from_vec(vec![0.5, 0.5])).unwrap();
        assert_eq!(m.sigma(), &Matrix::from_diagonal(&Vector::from_vec(vec![0.25, 0.25])));
        assert!(MaliciousnessModel::independent(Vector::from_vec(vec![1.2])).is_err());
    }

    #[test]
    fn covariance_validation() {
        let mu = Vector::from_vec(vec![0.5, 0.5]);
        let ok = Matrix::from_row_slice(2, 2, &[0.25, 0.1, 0.1, 0.25]);
        assert!(MaliciousnessModel::with_covariance(mu.clone(), ok).is_ok());
        let big = Matrix::from_row_slice(2, 2, &[0.25, 0.3, 0.3, 0.25]);
        assert!(MaliciousnessModel::with_covariance(mu.clone(), big).is_err());
        let asym = Matrix::from_row_slice(2, 2, &[0.25, 0.1, 0.0, 0.25]);
        assert!(MaliciousnessModel::with_covariance(mu, asym).is_err());
    }

    #[test]
    fn synthetic_counts() {
        let g = Graph::empty(10);
        let b = BetaParams::new(1.0, 9.0);
        let m = BetaParams::new(9.0, 1.0);
        let (model, truth) = synthetic_assign(&g, 0.1, b, m, 3).unwrap();
        assert_eq!(truth.malicious_count(), 1);
        assert!(model.is_independent());
        let (_, none) = synthetic_assign(&g, 0.0, b, m, 3).unwrap();
        assert_eq!(none.malicious_count(), 0);
        assert!(synthetic_assign(&g, 1.5, b, m, 3).is_err());
        assert!(synthetic_assign(&g, 0.1, BetaParams::new(0.0, 1.0), m, 3).is_err());
    }

    #[test]
    fn synthetic_class_means() {
        let g = barabasi_albert(128, 2, 1).unwrap();
        let b = BetaParams::new(1.0, 9.0);
        let m = BetaParams::new(9.0, 1.0);
        let (model, truth) = synthetic_assign(&g, 0.1, b, m, 5).unwrap();
        let (mut sb, mut nb, mut sm, mut nm) = (0.0, 0, 0.0, 0);
        for (i, &t) in truth.as_slice().iter().enumerate() {
            if t == 1 {
                sm += model.mu()[i];
                nm += 1;
            } else {
                sb += model.mu()[i];
                nb += 1;
            }
        }
        assert_eq!(nm, 12);
        assert!(sb / nb as f64 > 0.0 && sb / (nb as f64) < 0.3);
        assert!(sm / nm as f64 > 0.7);
    }

    #[test]
    fn perturb_zero_is_identity_and_clamps() {
        let m = MaliciousnessModel::independent(Vector::from_vec(vec![0.2, 0.7])).unwrap();
        assert_eq!(perturb(&m, 0.0, 1).unwrap(), m);
        let z = MaliciousnessModel::independent(Vector::from_vec(vec![0.0; 50])).unwrap();
        for seed in 0..20 {
            let p = perturb(&z, 0.1, seed).unwrap();
            assert!(p.mu().iter().all(|&x| (0.0..=1.0).contains(&x)));
            for i in 0..50 {
                let v = p.mu()[i];
                assert!((p.sigma()[(i, i)] - v * (1.0 - v)).abs() < 1e-15);
            }
        }
        assert!(perturb(&m, -0.1, 1).is_err());
    }

    #[test]
    fn perturb_noise_scale() {
        let m = MaliciousnessModel::independent(Vector::from_element(1000, 0.5)).unwrap();
        let p = perturb(&m, 0.2, 1).unwrap();
        let d: Vec<f64> = (0..1000).map(|i| p.mu()[i] - 0.5).collect();
        let mean = d.iter().sum::<f64>() / 1000.0;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0).sqrt();
        assert!((0.17..=0.21).contains(&sd), "sd {sd}");
    }

    #[test]
    fn sampling() {
        let m = MaliciousnessModel::independent(Vector::from_vec(vec![1.0, 0.0])).unwrap();
        for seed in 0..50 {
            assert_eq!(sample_configuration(&m, seed).unwrap().as_slice(), &[1, 0]);
        }
        let half = MaliciousnessModel::independent(Vector::from_vec(vec![0.5])).unwrap();
        let hits: usize = (0..10_000)
            .map(|s| sample_configuration(&half, s).unwrap().as_slice()[0] as usize)
            .sum();
        assert!((hits as f64 / 1e4 - 0.5).abs() <= 0.02);

        let corr = MaliciousnessModel::with_covariance(
            Vector::from_vec(vec![0.5, 0.5]),
            Matrix::from_row_slice(2, 2, &[0.25, 0.1, 0.1, 0.25]),
        )
        .unwrap();
        assert!(matches!(
            sample_configuration(&corr, 0),
            Err(Error::UnsupportedDistribution(_))
        ));
    }

    #[test]
    fn csv_examples() {
        let t = load_probabilities("id,p\n0,0.9\n1,0.1").unwrap();
        assert_eq!(t.mu.as_slice(), &[0.9, 0.1]);
        assert!(t.labels.is_none());

        let err = load_probabilities("id,p\n0,0.9\n0,0.1").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let t = load_probabilities("id,p,label\n0,0.8,1\n1,0.2,0").unwrap();
        assert_eq!(t.mu.as_slice(), &[0.8, 0.2]);
        assert_eq!(t.labels.unwrap(), vec![1, 0]);

        // rows out of order are placed by id
        let t = load_probabilities("id,p\n1,0.3\n0,0.4\n").unwrap();
        assert_eq!(t.mu.as_slice(), &[0.4, 0.3]);

        assert!(load_probabilities("id,p\n0,1.5").is_err());
        assert!(load_probabilities("id,p\n0,0.5\n2,0.5").is_err());
        assert!(load_probabilities("id,p,label\n0,0.5,2").is_err());
        assert!(load_probabilities("id,p\n").is_err());
        assert!(load_probabilities("id\n0").is_err());
    }

    #[test]
    fn csv_write_precision() {
        assert_eq!(format_probability(0.9), "0.90000000000000002");
        assert_eq!(format_probability(1.0), "1.0000000000000000");
        let mu = Vector::from_vec(vec![0.1, 1.0 / 3.0, 0.0, 1.0, 1e-7]);
        let text = write_probabilities(&mu, Some(&[0, 1, 0, 1, 0]));
        let back = load_probabilities(&text).unwrap();
        assert_eq!(back.mu, mu);
        assert_eq!(back.labels.unwrap(), vec![0, 1, 0, 1, 0]);
    }
}
