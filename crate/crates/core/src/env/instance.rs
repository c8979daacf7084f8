use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Observation noise added on top of the expected reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// `R = P + N(0, sigma^2)`.
    Gaussian { sigma: f64 },
    /// Like/dislike feedback: `R = +1` with probability `P`, else `-1`.
    SignBernoulli,
}

impl NoiseModel {
    /// Sub-gaussian scale handed to the estimators.
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::Gaussian { sigma } => *sigma,
            // a {-1, +1} variable is sub-gaussian with variance proxy 1
            NoiseModel::SignBernoulli => 1.0,
        }
    }
}

/// Distribution of the entries of the latent item factor (or of the core
/// matrix when items are clustered too).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntryLaw {
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    Discrete { values: Vec<f64> },
}

impl EntryLaw {
    fn validate(&self) -> Result<()> {
        match self {
            EntryLaw::Normal { std, .. } if !(*std >= 0.0) => {
                Err(Error::config("normal law needs std >= 0"))
            }
            EntryLaw::Uniform { low, high } if !(low < high) => {
                Err(Error::config("uniform law needs low < high"))
            }
            EntryLaw::Discrete { values } if values.is_empty() => {
                Err(Error::config("discrete law needs at least one value"))
            }
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EntryLaw::Normal { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
            EntryLaw::Uniform { low, high } => rng.sample(Uniform::new(*low, *high)),
            EntryLaw::Discrete { values } => values[rng.gen_range(0..values.len())],
        }
    }
}

/// Named synthetic datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// `V ~ N(0, 25)`, Gaussian noise with variance 0.25.
    D1,
    /// `V ~ U(0, 5)`, Gaussian noise with variance 0.25.
    D2,
    /// `V` uniform on `{0.05, 0.10, ..., 0.95}`, like/dislike feedback.
    D3,
    /// Law and noise given explicitly.
    Custom,
}

impl Dataset {
    pub fn default_law(self) -> Option<EntryLaw> {
        match self {
            Dataset::D1 => Some(EntryLaw::Normal {
                mean: 0.0,
                std: 5.0,
            }),
            Dataset::D2 => Some(EntryLaw::Uniform {
                low: 0.0,
                high: 5.0,
            }),
            Dataset::D3 => Some(EntryLaw::Discrete {
                values: (1..=19).map(|k| k as f64 * 0.05).collect(),
            }),
            Dataset::Custom => None,
        }
    }

    pub fn default_noise(self) -> Option<NoiseModel> {
        match self {
            Dataset::D1 | Dataset::D2 => Some(NoiseModel::Gaussian { sigma: 0.5 }),
            Dataset::D3 => Some(NoiseModel::SignBernoulli),
            Dataset::Custom => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dataset::D1 => "d1",
            Dataset::D2 => "d2",
            Dataset::D3 => "d3",
            Dataset::Custom => "custom",
        }
    }
}

/// Recipe for a synthetic instance. User `i` belongs to cluster `i mod C`;
/// when `item_clusters` is set, item `j` belongs to item cluster `j mod C'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub dataset: Dataset,
    pub users: usize,
    pub items: usize,
    pub clusters: usize,
    pub horizon: usize,
    pub budget: usize,
    /// Overrides the dataset's entry law (required for `custom`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<EntryLaw>,
    /// Overrides the dataset's noise model (required for `custom`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_clusters: Option<usize>,
}

impl GeneratorSpec {
    pub fn preset(
        dataset: Dataset,
        users: usize,
        items: usize,
        clusters: usize,
        horizon: usize,
        budget: usize,
    ) -> Self {
        GeneratorSpec {
            dataset,
            users,
            items,
            clusters,
            horizon,
            budget,
            law: None,
            noise: None,
            item_clusters: None,
        }
    }

    pub fn custom(
        users: usize,
        items: usize,
        clusters: usize,
        horizon: usize,
        budget: usize,
        law: EntryLaw,
        noise: NoiseModel,
    ) -> Self {
        GeneratorSpec {
            law: Some(law),
            noise: Some(noise),
            ..Self::preset(Dataset::Custom, users, items, clusters, horizon, budget)
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_law(mut self, law: EntryLaw) -> Self {
        self.law = Some(law);
        self
    }

    pub fn with_item_clusters(mut self, item_clusters: usize) -> Self {
        self.item_clusters = Some(item_clusters);
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn resolved_law(&self) -> Result<EntryLaw> {
        self.law
            .clone()
            .or_else(|| self.dataset.default_law())
            .ok_or_else(|| Error::config("custom dataset requires an explicit `law`"))
    }

    pub fn resolved_noise(&self) -> Result<NoiseModel> {
        self.noise
            .clone()
            .or_else(|| self.dataset.default_noise())
            .ok_or_else(|| Error::config("custom dataset requires an explicit `noise`"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.items == 0 || self.horizon == 0 {
            return Err(Error::config("users, items and horizon must be positive"));
        }
        if self.clusters == 0 || self.clusters > self.users {
            return Err(Error::config(format!(
                "cluster count {} must lie in [1, users = {}]",
                self.clusters, self.users
            )));
        }
        if self.budget == 0 {
            return Err(Error::config("budget must be at least 1"));
        }
        if self.items * self.budget < self.horizon {
            return Err(Error::config(format!(
                "infeasible budget: items * budget = {} < horizon = {}",
                self.items * self.budget,
                self.horizon
            )));
        }
        if let Some(cp) = self.item_clusters {
            if cp == 0 || cp > self.items {
                return Err(Error::config(format!(
                    "item cluster count {cp} must lie in [1, items = {}]",
                    self.items
                )));
            }
        }
        self.resolved_law()?.validate()?;
        if let NoiseModel::Gaussian { sigma } = self.resolved_noise()? {
            if !(sigma >= 0.0) {
                return Err(Error::config("gaussian noise needs sigma >= 0"));
            }
        }
        Ok(())
    }
}

/// A ground-truth blocked bandit problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    users: usize,
    items: usize,
    horizon: usize,
    budget: usize,
    clusters: usize,
    cluster_of: Vec<usize>,
    item_cluster_of: Option<Vec<usize>>,
    p: DMatrix<f64>,
    noise: NoiseModel,
    means: DMatrix<f64>,
}

impl Instance {
    /// Builds and validates an instance.
    pub fn new(
        p: DMatrix<f64>,
        cluster_of: Vec<usize>,
        clusters: usize,
        horizon: usize,
        budget: usize,
        noise: NoiseModel,
    ) -> Result<Self> {
        let (users, items) = p.shape();
        if users == 0 || items == 0 || horizon == 0 || budget == 0 {
            return Err(Error::config(
                "dimensions, horizon and budget must be positive",
            ));
        }
        if cluster_of.len() != users {
            return Err(Error::config(format!(
                "cluster_of has {} entries for {users} users",
                cluster_of.len()
            )));
        }
        if items * budget < horizon {
            return Err(Error::config(format!(
                "infeasible budget: N * B = {} < T = {horizon}",
                items * budget
            )));
        }
        let mut seen = vec![false; clusters];
        for &c in &cluster_of {
            if c >= clusters {
                return Err(Error::config(format!(
                    "cluster id {c} out of range [0, {clusters})"
                )));
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("cluster_of is not surjective onto [C]"));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("reward matrix has non-finite entries"));
        }
        let mut representative = vec![usize::MAX; clusters];
        for (u, &c) in cluster_of.iter().enumerate() {
            if representative[c] == usize::MAX {
                representative[c] = u;
            } else if p.row(u) != p.row(representative[c]) {
                return Err(Error::config(format!(
                    "users {} and {u} share cluster {c} but have different reward rows",
                    representative[c]
                )));
            }
        }
        if noise == NoiseModel::SignBernoulli && p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::config(
                "sign-Bernoulli noise needs rewards in [0, 1]",
            ));
        }
        let means = match noise {
            NoiseModel::Gaussian { .. } => p.clone(),
            NoiseModel::SignBernoulli => p.map(|x| 2.0 * x - 1.0),
        };
        Ok(Instance {
            users,
            items,
            horizon,
            budget,
            clusters,
            cluster_of,
            item_cluster_of: None,
            p,
            noise,
            means,
        })
    }

    pub fn with_item_clusters(mut self, item_cluster_of: Vec<usize>) -> Result<Self> {
        if item_cluster_of.len() != self.items {
            return Err(Error::config(
                "item_cluster_of length differs from item count",
            ));
        }
        self.item_cluster_of = Some(item_cluster_of);
        Ok(self)
    }

    pub fn users(&self) -> usize {
        self.users
    }
    pub fn items(&self) -> usize {
        self.items
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn budget(&self) -> usize {
        self.budget
    }
    pub fn clusters(&self) -> usize {
        self.clusters
    }
    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }
    pub fn item_cluster_of(&self) -> Option<&[usize]> {
        self.item_cluster_of.as_deref()
    }
    pub fn item_clusters(&self) -> Option<usize> {
        self.item_cluster_of
            .as_ref()
            .map(|c| c.iter().copied().max().map_or(0, |m| m + 1))
    }
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Mean of the observation process; every regret and oracle computation
    /// uses this matrix. Equals `P` under Gaussian noise and `2P - 1` under
    /// sign-Bernoulli feedback.
    pub fn mean_reward_matrix(&self) -> &DMatrix<f64> {
        &self.means
    }

    /// `||P||_inf` of the raw reward matrix.
    pub fn p_max(&self) -> f64 {
        self.p.amax()
    }

    /// Largest absolute expected observation.
    pub fn mean_max(&self) -> f64 {
        self.means.amax()
    }

    /// Same instance with a different horizon and budget (the ground truth is
    /// untouched).
    pub fn with_horizon_budget(&self, horizon: usize, budget: usize) -> Result<Self> {
        if self.items * budget < horizon || horizon == 0 || budget == 0 {
            return Err(Error::config(format!(
                "infeasible horizon/budget: N * B = {} < T = {horizon}",
                self.items * budget
            )));
        }
        let mut out = self.clone();
        out.horizon = horizon;
        out.budget = budget;
        Ok(out)
    }

    /// Draws one noisy observation of `P[u, j]`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, u: usize, j: usize, rng: &mut R) -> f64 {
        let mean = self.p[(u, j)];
        match self.noise {
            NoiseModel::Gaussian { sigma } => {
                if sigma == 0.0 {
                    mean
                } else {
                    mean + sigma * rng.sample::<f64, _>(StandardNormal)
                }
            }
            NoiseModel::SignBernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Sizes of the latent user clusters.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.clusters];
        for &c in &self.cluster_of {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&InstanceDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Wire form of an [`Instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub cluster_of: Vec<usize>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_cluster_of: Option<Vec<usize>>,
}

impl From<&Instance> for InstanceDoc {
    fn from(inst: &Instance) -> Self {
        InstanceDoc {
            m: inst.users,
            n: inst.items,
            t: inst.horizon,
            b: inst.budget,
            c: inst.clusters,
            cluster_of: inst.cluster_of.clone(),
            p: (0..inst.users)
                .map(|u| inst.p.row(u).iter().copied().collect())
                .collect(),
            noise: inst.noise.clone(),
            item_cluster_of: inst.item_cluster_of.clone(),
        }
    }
}

impl TryFrom<InstanceDoc> for Instance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.p.len() != doc.m || doc.p.iter().any(|r| r.len() != doc.n) {
            return Err(Error::config(format!(
                "P must be an {} x {} array",
                doc.m, doc.n
            )));
        }
        let p = DMatrix::from_fn(doc.m, doc.n, |i, j| doc.p[i][j]);
        let inst = Instance::new(p, doc.cluster_of, doc.c, doc.t, doc.b, doc.noise)?;
        match doc.item_cluster_of {
            Some(ic) => inst.with_item_clusters(ic),
            None => Ok(inst),
        }
    }
}

/// Generates `P = U V^T` with one-hot user factors (or `P_ij = Q[c(i), c'(j)]`
/// when item clusters are requested). Deterministic in `seed`.
pub fn generate_instance(spec: &GeneratorSpec, seed: u64) -> Result<Instance> {
    spec.validate()?;
    let law = spec.resolved_law()?;
    let noise = spec.resolved_noise()?;
    let mut rng = rng::stream(seed, "instance", &[]);
    let cluster_of: Vec<usize> = (0..spec.users).map(|i| i % spec.clusters).collect();

    let (p, item_cluster_of) = match spec.item_clusters {
        None => {
            // V is N x C; row u of P is column cluster_of[u] of V^T.
            let mut v = DMatrix::zeros(spec.items, spec.clusters);
            for x in v.iter_mut() {
                *x = law.sample(&mut rng);
            }
            let p = DMatrix::from_fn(spec.users, spec.items, |u, j| v[(j, cluster_of[u])]);
            (p, None)
        }
        Some(cp) => {
            let mut q = DMatrix::zeros(spec.clusters, cp);
            for x in q.iter_mut() {
                *x = law.sample(&mut rng);
            }
            let item_of: Vec<usize> = (0..spec.items).map(|j| j % cp).collect();
            let p = DMatrix::from_fn(spec.users, spec.items, |u, j| {
                q[(cluster_of[u], item_of[j])]
            });
            (p, Some(item_of))
        }
    };

    let inst = Instance::new(
        p,
        cluster_of,
        spec.clusters,
        spec.horizon,
        spec.budget,
        noise,
    )?;
    match item_cluster_of {
        Some(ic) => inst.with_item_clusters(ic),
        None => Ok(inst),
    }
}

/// Like [`generate_instance`] but every pair of user clusters differs by at
/// least `gap` on every item.
///
/// For each item (or item cluster) the `C` cluster means are
/// `base + gap * pi(c)` for a uniform `base` in `[0, 1)` and a random
/// permutation `pi` of `0..C`. The entry law of `spec` is ignored.
pub fn generate_separated(spec: &GeneratorSpec, gap: f64, seed: u64) -> Result<Instance> {
    spec.validate()?;
    if !(gap.is_finite() && gap >= 0.0) {
        return Err(Error::config("gap must be finite and non-negative"));
    }
    let noise = spec.resolved_noise()?;
    let mut rng = rng::stream(seed, "separated", &[]);
    let cluster_of: Vec<usize> = (0..spec.users).map(|i| i % spec.clusters).collect();
    let cols = spec.item_clusters.unwrap_or(spec.items);
    let mut levels: Vec<usize> = (0..spec.clusters).collect();
    let q = {
        let mut q = DMatrix::zeros(spec.clusters, cols);
        for j in 0..cols {
            let base: f64 = rng.gen();
            levels.shuffle(&mut rng);
            for c in 0..spec.clusters {
                q[(c, j)] = base + gap * levels[c] as f64;
            }
        }
        q
    };
    let item_of: Vec<usize> = (0..spec.items).map(|j| j % cols).collect();
    let p = DMatrix::from_fn(spec.users, spec.items, |u, j| {
        q[(cluster_of[u], item_of[j])]
    });
    let inst = Instance::new(
        p,
        cluster_of,
        spec.clusters,
        spec.horizon,
        spec.budget,
        noise,
    )?;
    match spec.item_clusters {
        Some(_) => inst.with_item_clusters(item_of),
        None => Ok(inst),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1(m: usize, n: usize, c: usize, t: usize) -> GeneratorSpec {
        GeneratorSpec::preset(Dataset::D1, m, n, c, t, 1)
    }

    #[test]
    fn d1_full_size_has_equal_clusters() {
        let inst = generate_instance(&d1(150, 150, 4, 60), 3).unwrap();
        assert_eq!(inst.users(), 150);
        assert_eq!(inst.items(), 150);
        let sizes = inst.cluster_sizes();
        assert_eq!(sizes.len(), 4);
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1, "{sizes:?}");
    }

    #[test]
    fn single_cluster_rows_identical() {
        let spec = GeneratorSpec::custom(
            7,
            9,
            1,
            4,
            1,
            EntryLaw::Uniform {
                low: 0.0,
                high: 1.0,
            },
            NoiseModel::Gaussian { sigma: 0.1 },
        );
        let inst = generate_instance(&spec, 11).unwrap();
        for u in 1..7 {
            assert_eq!(inst.p().row(u), inst.p().row(0));
        }
    }

    #[test]
    fn separated_clusters_keep_the_gap() {
        let spec = GeneratorSpec::preset(Dataset::D2, 12, 9, 4, 6, 1)
            .with_noise(NoiseModel::Gaussian { sigma: 0.0 })
            .with_item_clusters(3);
        let inst = generate_separated(&spec, 0.5, 2).unwrap();
        let p = inst.p();
        for a in 0..4 {
            for b in 0..a {
                for j in 0..9 {
                    assert!((p[(a, j)] - p[(b, j)]).abs() >= 0.5 - 1e-12);
                }
            }
        }
        assert_eq!(inst.item_clusters(), Some(3));
        assert_eq!(p.column(0), p.column(3));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GeneratorSpec::preset(Dataset::D2, 20, 30, 3, 10, 1);
        let a = generate_instance(&spec, 99).unwrap();
        let b = generate_instance(&spec, 99).unwrap();
        let c = generate_instance(&spec, 100).unwrap();
        assert_eq!(a.p(), b.p());
        assert_ne!(a.p(), c.p());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate_instance(&d1(3, 10, 4, 5), 0).is_err()); // C > M
        assert!(generate_instance(&d1(10, 10, 2, 11), 0).is_err()); // N * B < T
        let custom_without_law = GeneratorSpec::preset(Dataset::Custom, 4, 4, 1, 2, 1);
        assert!(generate_instance(&custom_without_law, 0).is_err());
    }

    #[test]
    fn zero_noise_sample_is_exact() {
        let spec = GeneratorSpec::preset(Dataset::D1, 6, 5, 2, 3, 1)
            .with_noise(NoiseModel::Gaussian { sigma: 0.0 });
        let inst = generate_instance(&spec, 1).unwrap();
        let mut r = rng::stream(0, "t", &[]);
        for u in 0..6 {
            for j in 0..5 {
                assert_eq!(
                    inst.sample_reward(u, j, &mut r),
                    inst.mean_reward_matrix()[(u, j)]
                );
            }
        }
    }

    #[test]
    fn degenerate_bernoulli_always_likes() {
        let p = DMatrix::from_element(1, 2, 1.0);
        let inst = Instance::new(p, vec![0], 1, 1, 1, NoiseModel::SignBernoulli).unwrap();
        let mut r = rng::stream(5, "t", &[]);
        assert!((0..1000).all(|_| inst.sample_reward(0, 1, &mut r) == 1.0));
    }

    #[test]
    fn gaussian_sample_mean_concentrates() {
        // sd of the mean of 1e5 draws is 0.5/316 = 1.6e-3; 0.01 is a 6-sigma bound
        let p = DMatrix::from_row_slice(1, 1, &[1.25]);
        let inst = Instance::new(p, vec![0], 1, 1, 1, NoiseModel::Gaussian { sigma: 0.5 }).unwrap();
        let mut r = rng::stream(17, "t", &[]);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| inst.sample_reward(0, 0, &mut r))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.25).abs() < 0.01, "{mean}");
    }

    #[test]
    fn sign_bernoulli_means() {
        let p = DMatrix::from_row_slice(1, 3, &[0.5, 0.95, 0.05]);
        let inst = Instance::new(p, vec![0], 1, 1, 1, NoiseModel::SignBernoulli).unwrap();
        let m = inst.mean_reward_matrix();
        assert_eq!(m[(0, 0)], 0.0);
        assert!((m[(0, 1)] - 0.9).abs() < 1e-12);
        let g = Instance::new(
            DMatrix::from_row_slice(1, 2, &[3.0, -1.0]),
            vec![0],
            1,
            1,
            1,
            NoiseModel::Gaussian { sigma: 1.0 },
        )
        .unwrap();
        assert_eq!(g.mean_reward_matrix(), g.p());
    }

    #[test]
    fn json_round_trip() {
        let spec = GeneratorSpec::preset(Dataset::D3, 8, 6, 2, 4, 1).with_item_clusters(3);
        let inst = generate_instance(&spec, 4).unwrap();
        let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
        let text = inst.to_json().unwrap();
        for key in [
            "\"M\"",
            "\"N\"",
            "\"T\"",
            "\"B\"",
            "\"C\"",
            "\"cluster_of\"",
            "\"P\"",
            "\"noise\"",
        ] {
            assert!(text.contains(key), "{key} missing");
        }
    }

    #[test]
    fn item_cluster_generation() {
        let spec = GeneratorSpec::preset(Dataset::D2, 10, 12, 2, 4, 1).with_item_clusters(3);
        let inst = generate_instance(&spec, 8).unwrap();
        assert_eq!(inst.item_clusters(), Some(3));
        let p = inst.p();
        for j in 0..12 {
            assert_eq!(p.column(j), p.column(j % 3));
        }
    }

    #[test]
    fn rejects_mixed_cluster_rows() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(Instance::new(p, vec![0, 0], 1, 1, 1, NoiseModel::SignBernoulli).is_err());
    }
}
