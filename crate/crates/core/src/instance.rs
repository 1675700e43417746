//! Problem instances: explicit action sets over `d` base items, a mean
//! vector, a covariance matrix, and the bounded reward sampler.
//!
//! Rewards follow a bounded linear factor model: `Y = μ + L u` with `L` the
//! (PSD-safe) Cholesky factor of `Σ*` and `u` made of `d` independent
//! `Uniform[-√3, √3]` coordinates. Then `E[Y] = μ`, `Cov(Y) = Σ*` exactly and
//! `|Y_i - μ_i| ≤ √3 Σ_j |L_ij| = B_i` on every draw.

use std::collections::HashSet;
use std::fmt;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{factorize, LowerTriangular, SymMatrix};

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Relative tolerance used when checking `Σ* = L Lᵀ`.
pub const FACTOR_TOLERANCE: f64 = 1e-8;

/// An explicit, ordered list of actions; each action is a sorted set of items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    d: usize,
    actions: Vec<Vec<usize>>,
}

impl ActionSet {
    /// Items inside each action are sorted and deduplicated; no other check
    /// is made here (see [`Instance::violations`]).
    pub fn new(d: usize, actions: Vec<Vec<usize>>) -> Self {
        let actions = actions
            .into_iter()
            .map(|mut a| {
                a.sort_unstable();
                a.dedup();
                a
            })
            .collect();
        Self { d, actions }
    }

    pub fn from_masks(masks: &[Vec<bool>]) -> Result<Self> {
        let d = masks.first().map(Vec::len).unwrap_or(0);
        let mut actions = Vec::with_capacity(masks.len());
        for m in masks {
            if m.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.len(),
                });
            }
            actions.push(m.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect());
        }
        Ok(Self::new(d, actions))
    }

    /// Parses strings of `'0'`/`'1'` of length `d`.
    pub fn from_bitstrings<S: AsRef<str>>(d: usize, bits: &[S]) -> Result<Self> {
        let mut actions = Vec::with_capacity(bits.len());
        for (p, s) in bits.iter().enumerate() {
            let s = s.as_ref();
            if s.chars().count() != d {
                return Err(Error::Format(format!(
                    "action {p} has length {}, expected {d}",
                    s.chars().count()
                )));
            }
            let mut items = Vec::new();
            for (i, c) in s.chars().enumerate() {
                match c {
                    '1' => items.push(i),
                    '0' => {}
                    other => {
                        return Err(Error::Format(format!(
                            "action {p} contains invalid character {other:?}"
                        )))
                    }
                }
            }
            actions.push(items);
        }
        Ok(Self::new(d, actions))
    }

    pub fn to_bitstrings(&self) -> Vec<String> {
        self.actions
            .iter()
            .map(|a| {
                let mut s = vec!['0'; self.d];
                for &i in a {
                    s[i] = '1';
                }
                s.into_iter().collect()
            })
            .collect()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    #[inline]
    pub fn items(&self, p: usize) -> &[usize] {
        &self.actions[p]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.actions.iter().map(Vec::as_slice)
    }

    pub fn contains(&self, p: usize, item: usize) -> bool {
        self.actions[p].binary_search(&item).is_ok()
    }

    /// Binary indicator vector of action `p`.
    pub fn indicator(&self, p: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        for &i in &self.actions[p] {
            v[i] = 1.0;
        }
        v
    }

    pub fn max_size(&self) -> usize {
        self.actions.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `reachable[i * d + j]` is true when some action contains both items.
    pub fn reachable_pairs(&self) -> Vec<bool> {
        let d = self.d;
        let mut r = vec![false; d * d];
        for a in &self.actions {
            for &i in a {
                for &j in a {
                    r[i * d + j] = true;
                }
            }
        }
        r
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.d == 0 {
            out.push(Violation::NoItems);
        }
        if self.actions.is_empty() {
            out.push(Violation::NoActions);
        }
        let mut covered = vec![false; self.d];
        let mut seen: HashSet<&[usize]> = HashSet::new();
        for (p, a) in self.actions.iter().enumerate() {
            if a.is_empty() {
                out.push(Violation::EmptyAction(p));
            }
            for &i in a {
                if i >= self.d {
                    out.push(Violation::ItemOutOfRange { action: p, item: i });
                } else {
                    covered[i] = true;
                }
            }
            if !seen.insert(a.as_slice()) {
                out.push(Violation::DuplicateAction(p));
            }
        }
        for (i, c) in covered.iter().enumerate() {
            if !c {
                out.push(Violation::UnreachableItem(i));
            }
        }
        out
    }
}

/// One broken instance invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoItems,
    NoActions,
    EmptyAction(usize),
    DuplicateAction(usize),
    ItemOutOfRange { action: usize, item: usize },
    UnreachableItem(usize),
    Dimension { field: &'static str, expected: usize, got: usize },
    NonFinite(&'static str),
    SigmaAsymmetric { i: usize, j: usize },
    NegativeVariance(usize),
    FactorMismatch { i: usize, j: usize },
    BoundsInconsistent(usize),
    BoundBelowDeviation(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoItems => write!(f, "instance has no items"),
            Violation::NoActions => write!(f, "action set is empty"),
            Violation::EmptyAction(p) => write!(f, "action {p} contains no item"),
            Violation::DuplicateAction(p) => write!(f, "duplicate action {p}"),
            Violation::ItemOutOfRange { action, item } => {
                write!(f, "action {action} references item {item} out of range")
            }
            Violation::UnreachableItem(i) => write!(f, "unreachable item {i}"),
            Violation::Dimension { field, expected, got } => {
                write!(f, "{field} has dimension {got}, expected {expected}")
            }
            Violation::NonFinite(field) => write!(f, "{field} contains non-finite values"),
            Violation::SigmaAsymmetric { i, j } => write!(f, "sigma is not symmetric at ({i}, {j})"),
            Violation::NegativeVariance(i) => write!(f, "sigma has negative diagonal at {i}"),
            Violation::FactorMismatch { i, j } => {
                write!(f, "factor does not reproduce sigma at ({i}, {j})")
            }
            Violation::BoundsInconsistent(i) => {
                write!(f, "bounds inconsistent with factor at item {i}")
            }
            Violation::BoundBelowDeviation(i) => {
                write!(f, "bound squared below variance at item {i}")
            }
        }
    }
}

/// A combinatorial semi-bandit environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub action_set: ActionSet,
    pub mu: Vec<f64>,
    pub sigma: SymMatrix,
    pub factor: LowerTriangular,
    pub bounds: Vec<f64>,
}

/// `B_i = √3 · Σ_j |L_ij|`.
pub fn bounds_from_factor(factor: &LowerTriangular) -> Vec<f64> {
    (0..factor.dim())
        .map(|i| SQRT_3 * factor.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .collect()
}

impl Instance {
    /// Factorizes `sigma`, derives the bounds and validates the result.
    pub fn new(
        name: impl Into<String>,
        action_set: ActionSet,
        mu: Vec<f64>,
        sigma: SymMatrix,
    ) -> Result<Self> {
        let factor = factorize(&sigma)?;
        let bounds = bounds_from_factor(&factor);
        let inst = Self::from_parts(name, action_set, mu, sigma, factor, bounds);
        inst.validate()?;
        Ok(inst)
    }

    /// Assembles an instance without any check.
    pub fn from_parts(
        name: impl Into<String>,
        action_set: ActionSet,
        mu: Vec<f64>,
        sigma: SymMatrix,
        factor: LowerTriangular,
        bounds: Vec<f64>,
    ) -> Self {
        Self {
            name: name.into(),
            action_set,
            mu,
            sigma,
            factor,
            bounds,
        }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.action_set.d()
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.action_set.len()
    }

    /// Every broken invariant, in a stable order.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = self.action_set.violations();
        let d = self.d();
        let dims = [
            ("mu", self.mu.len()),
            ("sigma", self.sigma.dim()),
            ("factor", self.factor.dim()),
            ("bounds", self.bounds.len()),
        ];
        let mut dims_ok = true;
        for (field, got) in dims {
            if got != d {
                out.push(Violation::Dimension { field, expected: d, got });
                dims_ok = false;
            }
        }
        if !dims_ok {
            return out;
        }
        for (field, values) in [
            ("mu", self.mu.as_slice()),
            ("sigma", self.sigma.as_row_major()),
            ("factor", self.factor.as_row_major()),
            ("bounds", self.bounds.as_slice()),
        ] {
            if values.iter().any(|v| !v.is_finite()) {
                out.push(Violation::NonFinite(field));
            }
        }
        let raw = self.sigma.as_row_major();
        for i in 0..d {
            for j in (i + 1)..d {
                if raw[i * d + j] != raw[j * d + i] {
                    out.push(Violation::SigmaAsymmetric { i, j });
                }
            }
            if self.sigma.get(i, i) < 0.0 {
                out.push(Violation::NegativeVariance(i));
            }
        }
        let rebuilt = self.factor.reconstruct();
        let tol = FACTOR_TOLERANCE * (1.0 + self.sigma.max_abs());
        'outer: for i in 0..d {
            for j in i..d {
                if !((rebuilt.get(i, j) - self.sigma.get(i, j)).abs() <= tol) {
                    out.push(Violation::FactorMismatch { i, j });
                    break 'outer;
                }
            }
        }
        let expected = bounds_from_factor(&self.factor);
        for i in 0..d {
            let (b, e) = (self.bounds[i], expected[i]);
            if !((b - e).abs() <= 1e-9 * (1.0 + e)) {
                out.push(Violation::BoundsInconsistent(i));
            }
            if b * b < self.sigma.get(i, i) * (1.0 - 1e-9) {
                out.push(Violation::BoundBelowDeviation(i));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(v.iter().map(ToString::to_string).collect()))
        }
    }

    /// Draws `Y = μ + L u` into `out`. Uses exactly `d` calls to
    /// `rng.random::<f64>()`, for `u_1, …, u_d` in order.
    pub fn sample_reward_into<R: Rng + ?Sized>(&self, rng: &mut R, u: &mut [f64], out: &mut [f64]) {
        for v in u.iter_mut() {
            let r: f64 = rng.random();
            *v = SQRT_3 * (2.0 * r - 1.0);
        }
        self.factor.apply(u, out);
        for (o, m) in out.iter_mut().zip(&self.mu) {
            *o += m;
        }
    }

    pub fn sample_reward<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.d();
        let mut u = vec![0.0; d];
        let mut y = vec![0.0; d];
        self.sample_reward_into(rng, &mut u, &mut y);
        y
    }

    /// `⟨a_p, μ⟩`.
    pub fn action_value(&self, p: usize) -> f64 {
        self.action_set.items(p).iter().map(|&i| self.mu[i]).sum()
    }

    pub fn gap_profile(&self) -> GapProfile {
        GapProfile::from_values((0..self.num_actions()).map(|p| self.action_value(p)).collect())
    }

    /// `a_pᵀ Σ* a_p`.
    pub fn action_variance(&self, p: usize) -> f64 {
        let items = self.action_set.items(p);
        let mut acc = 0.0;
        for (k, &i) in items.iter().enumerate() {
            acc += self.sigma.get(i, i);
            for &j in &items[k + 1..] {
                acc += 2.0 * self.sigma.get(i, j);
            }
        }
        acc
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            name: self.name.clone(),
            d: self.d(),
            actions: self.action_set.to_bitstrings(),
            mu: self.mu.clone(),
            sigma: self.sigma.as_row_major().to_vec(),
            bounds: self.bounds.clone(),
            factor: self.factor.as_row_major().to_vec(),
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let d = file.d;
        if d == 0 {
            return Err(Error::Format("d must be positive".into()));
        }
        let action_set = ActionSet::from_bitstrings(d, &file.actions)?;
        let sigma = SymMatrix::from_row_major_tol(d, file.sigma, 1e-12)
            .map_err(|e| Error::Format(format!("sigma: {e}")))?;
        let factor = LowerTriangular::from_row_major(d, file.factor)
            .map_err(|e| Error::Format(format!("factor: {e}")))?;
        let inst = Self::from_parts(file.name, action_set, file.mu, sigma, factor, file.bounds);
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_file(file)
    }
}

/// On-disk instance layout; matrices are row-major `d²` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub name: String,
    pub d: usize,
    pub actions: Vec<String>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub bounds: Vec<f64>,
    pub factor: Vec<f64>,
}

/// Per-action sub-optimality gaps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapProfile {
    pub optimal_index: usize,
    pub values: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Smallest strictly positive gap; `None` when every action is optimal.
    pub delta_min: Option<f64>,
    pub delta_max: f64,
}

impl GapProfile {
    /// Ties for the best value go to the lowest index.
    pub fn from_values(values: Vec<f64>) -> Self {
        let mut best = 0;
        for (p, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = p;
            }
        }
        let top = values[best];
        let gaps: Vec<f64> = values.iter().map(|v| top - v).collect();
        let delta_min = gaps.iter().copied().filter(|g| *g > 0.0).reduce(f64::min);
        let delta_max = gaps.iter().copied().fold(0.0, f64::max);
        Self {
            optimal_index: best,
            values,
            gaps,
            delta_min,
            delta_max,
        }
    }
}

/// The disjoint-action family: `d/m` actions, action `p` holding items
/// `(p-1)m+1 ..= pm`. The best action `best` (1-based) gets mean `delta`,
/// spread evenly over its items; every other item has mean 0.
pub fn make_disjoint_instance(
    d: usize,
    m: usize,
    sigma: SymMatrix,
    best: usize,
    delta: f64,
) -> Result<Instance> {
    if m == 0 || d % m != 0 || d / m < 2 {
        return Err(invalid(format!(
            "d/m must be an integer >= 2 (got d={d}, m={m})"
        )));
    }
    let blocks = d / m;
    if best == 0 || best > blocks {
        return Err(invalid(format!("best must lie in 1..={blocks} (got {best})")));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(invalid(format!("delta must be finite and >= 0 (got {delta})")));
    }
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: sigma.dim(),
        });
    }
    let actions = (0..blocks).map(|p| (p * m..(p + 1) * m).collect()).collect();
    let mut mu = vec![0.0; d];
    for v in &mut mu[(best - 1) * m..best * m] {
        *v = delta / m as f64;
    }
    Instance::new(
        format!("disjoint-d{d}-m{m}-best{best}"),
        ActionSet::new(d, actions),
        mu,
        sigma,
    )
}

/// Gap of the disjoint lower-bound construction:
/// `Δ = (1 - m/d) · √(Σ_k Σ'_kk / T)` with `Σ'_kk = a_kᵀ Σ* a_k`.
pub fn lower_bound_gap(action_variances: &[f64], m: usize, d: usize, horizon: u64) -> Result<f64> {
    if m == 0 || d % m != 0 || d / m < 2 {
        return Err(invalid(format!(
            "d/m must be an integer >= 2 (got d={d}, m={m})"
        )));
    }
    if action_variances.len() != d / m {
        return Err(Error::DimensionMismatch {
            expected: d / m,
            got: action_variances.len(),
        });
    }
    if horizon == 0 {
        return Err(invalid("horizon must be >= 1"));
    }
    if let Some(v) = action_variances.iter().find(|v| !(**v > 0.0)) {
        return Err(invalid(format!("per-action variances must be > 0 (got {v})")));
    }
    let total: f64 = action_variances.iter().sum();
    Ok((1.0 - m as f64 / d as f64) * (total / horizon as f64).sqrt())
}

/// `Σ_i max_{a ∋ i} Σ_{j ∈ a} Σ*_ij`, signed.
pub fn lower_bound_radicand(instance: &Instance) -> f64 {
    let d = instance.d();
    let mut total = 0.0;
    for i in 0..d {
        let mut best = f64::NEG_INFINITY;
        for a in instance.action_set.iter() {
            if a.binary_search(&i).is_ok() {
                let s: f64 = a.iter().map(|&j| instance.sigma.get(i, j)).sum();
                best = best.max(s);
            }
        }
        if best.is_finite() {
            total += best;
        }
    }
    total
}

/// Gap-free minimax lower bound `(1/8) √(T · radicand)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBound {
    pub bound: f64,
    pub radicand: f64,
    /// The radicand was negative and the bound was reported as 0.
    pub negative_radicand: bool,
    /// The radicand is exactly zero.
    pub degenerate: bool,
}

pub fn lower_bound_value(instance: &Instance, horizon: u64) -> Result<LowerBound> {
    if horizon == 0 {
        return Err(invalid("horizon must be >= 1"));
    }
    let radicand = lower_bound_radicand(instance);
    let negative = radicand < 0.0;
    let bound = if negative {
        0.0
    } else {
        (horizon as f64 * radicand).sqrt() / 8.0
    };
    Ok(LowerBound {
        bound,
        radicand,
        negative_radicand: negative,
        degenerate: radicand == 0.0,
    })
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub d: usize,
    pub p: usize,
    #[serde(default)]
    pub m_max: Option<usize>,
    /// In `[-1, 1]`; positive values push correlations up, negative down.
    #[serde(default)]
    pub corr_bias: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl RandomSpec {
    pub fn m_max(&self) -> usize {
        self.m_max.unwrap_or(self.d)
    }
}

/// Number of distinct nonempty subsets of `[d]` with at most `m_max` items,
/// saturating at `u128::MAX`.
pub fn feasible_action_count(d: usize, m_max: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 1..=m_max.min(d) {
        binom = binom.saturating_mul((d - k + 1) as u128) / k as u128;
        total = total.saturating_add(binom);
    }
    total
}

const MAX_COVER_ATTEMPTS: usize = 100_000;

/// Random instance: `P` distinct actions of size `≤ m_max` covering every
/// item, `Σ* = scale · G Gᵀ`, `μ ~ Uniform[0, 1]^d`.
///
/// Draw order: actions (size, then items) redrawn until they cover `[d]`,
/// then `G` row-major, then `μ`. For `corr_bias = b ≥ 0`,
/// `G_ij = U[-1, 1] + b`; for `b < 0`, `G = (I - |b| 11ᵀ/d) U` which drives
/// off-diagonal covariances negative.
pub fn gen_random_instance<R: Rng + ?Sized>(spec: &RandomSpec, rng: &mut R) -> Result<Instance> {
    let RandomSpec { d, p, corr_bias, scale, .. } = *spec;
    let m_max = spec.m_max();
    if d == 0 {
        return Err(invalid("d must be >= 1"));
    }
    if p == 0 {
        return Err(invalid("p must be >= 1"));
    }
    if m_max == 0 || m_max > d {
        return Err(invalid(format!("m_max must lie in 1..={d} (got {m_max})")));
    }
    if !(-1.0..=1.0).contains(&corr_bias) {
        return Err(invalid(format!("corr_bias must lie in [-1, 1] (got {corr_bias})")));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(invalid(format!("scale must be finite and > 0 (got {scale})")));
    }
    let feasible = feasible_action_count(d, m_max);
    if p as u128 > feasible {
        return Err(invalid(format!(
            "p={p} exceeds the {feasible} distinct actions with at most {m_max} of {d} items"
        )));
    }
    if p.saturating_mul(m_max) < d {
        return Err(invalid(format!(
            "p={p} actions of at most {m_max} items cannot cover {d} items"
        )));
    }

    let actions = draw_covering_actions(d, p, m_max, rng)?;

    let mut u = vec![0.0; d * d];
    for v in u.iter_mut() {
        *v = rng.random_range(-1.0..=1.0);
    }
    let g: Vec<f64> = if corr_bias >= 0.0 {
        u.iter().map(|v| v + corr_bias).collect()
    } else {
        let shrink = corr_bias.abs() / d as f64;
        let mut col_sum = vec![0.0; d];
        for i in 0..d {
            for k in 0..d {
                col_sum[k] += u[i * d + k];
            }
        }
        (0..d * d).map(|idx| u[idx] - shrink * col_sum[idx % d]).collect()
    };
    let sigma = SymMatrix::from_upper(d, |i, j| {
        scale * (0..d).map(|k| g[i * d + k] * g[j * d + k]).sum::<f64>()
    });
    let mu: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();

    Instance::new(
        format!("random-d{d}-p{p}-m{m_max}"),
        ActionSet::new(d, actions),
        mu,
        sigma,
    )
}

fn draw_covering_actions<R: Rng + ?Sized>(
    d: usize,
    p: usize,
    m_max: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    for _ in 0..MAX_COVER_ATTEMPTS {
        let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(p);
        let mut actions = Vec::with_capacity(p);
        while actions.len() < p {
            let size = rng.random_range(1..=m_max);
            let mut a = sample_indices(rng, d, size).into_vec();
            a.sort_unstable();
            if seen.insert(a.clone()) {
                actions.push(a);
            }
        }
        let mut covered = vec![false; d];
        for a in &actions {
            for &i in a {
                covered[i] = true;
            }
        }
        if covered.iter().all(|&c| c) {
            return Ok(actions);
        }
    }
    Err(invalid(format!(
        "no covering action set found after {MAX_COVER_ATTEMPTS} attempts (d={d}, p={p}, m_max={m_max})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn singletons(d: usize) -> ActionSet {
        ActionSet::new(d, (0..d).map(|i| vec![i]).collect())
    }

    fn diag_instance(diag: &[f64], mu: &[f64]) -> Instance {
        Instance::new("diag", singletons(diag.len()), mu.to_vec(), SymMatrix::diagonal(diag)).unwrap()
    }

    #[test]
    fn well_formed_instance_has_no_violations() {
        let inst = diag_instance(&[1.0, 2.0, 0.5], &[0.1, 0.2, 0.3]);
        assert!(inst.violations().is_empty());
        assert!(inst.validate().is_ok());
    }

    #[test]
    fn unreachable_item_reported() {
        let set = ActionSet::new(4, vec![vec![0, 1], vec![2]]);
        let v = set.violations();
        assert_eq!(v, vec![Violation::UnreachableItem(3)]);
        assert_eq!(v[0].to_string(), "unreachable item 3");
    }

    #[test]
    fn all_violations_collected() {
        let set = ActionSet::new(3, vec![vec![0], vec![], vec![0]]);
        let v = set.violations();
        assert!(v.contains(&Violation::EmptyAction(1)));
        assert!(v.contains(&Violation::DuplicateAction(2)));
        assert!(v.contains(&Violation::UnreachableItem(1)));
        assert!(v.contains(&Violation::UnreachableItem(2)));
    }

    #[test]
    fn inconsistent_bounds_reported() {
        let mut inst = diag_instance(&[1.0, 4.0], &[0.0, 0.0]);
        inst.bounds[1] *= 0.5;
        let v = inst.violations();
        assert!(v.contains(&Violation::BoundsInconsistent(1)));
        assert!(v[0].to_string().starts_with("bounds inconsistent with factor"));
    }

    #[test]
    fn deterministic_instance_samples_mean() {
        let inst = Instance::new(
            "zero",
            singletons(3),
            vec![0.3, -1.0, 2.0],
            SymMatrix::zeros(3),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(inst.sample_reward(&mut rng), inst.mu);
        }
    }

    #[test]
    fn unit_variance_sampler() {
        // Monte-Carlo: the uniform factor has variance 1.
        let inst = diag_instance(&[1.0], &[0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let mut sq = 0.0;
        for _ in 0..n {
            let y = inst.sample_reward(&mut rng)[0];
            sq += y * y;
        }
        let v = sq / n as f64;
        assert!((0.99..=1.01).contains(&v), "variance {v}");
    }

    #[test]
    fn gap_profile_examples() {
        let inst = diag_instance(&[1.0; 3], &[1.0, 0.0, 0.0]);
        let g = inst.gap_profile();
        assert_eq!(g.optimal_index, 0);
        assert_eq!(g.gaps, vec![0.0, 1.0, 1.0]);
        assert_eq!(g.delta_min, Some(1.0));

        let g = GapProfile::from_values(vec![2.0, 2.0]);
        assert_eq!(g.optimal_index, 0);
        assert_eq!(g.gaps, vec![0.0, 0.0]);
        assert_eq!(g.delta_min, None);

        let inst = Instance::new(
            "pairs",
            ActionSet::new(3, vec![vec![0, 1], vec![1, 2]]),
            vec![1.0, 2.0, 3.0],
            SymMatrix::identity(3),
        )
        .unwrap();
        let g = inst.gap_profile();
        assert_eq!(g.optimal_index, 1);
        assert_eq!(g.gaps, vec![2.0, 0.0]);
        assert_eq!(g.delta_min, Some(2.0));
    }

    #[test]
    fn disjoint_instance_examples() {
        let inst = make_disjoint_instance(4, 2, SymMatrix::identity(4), 1, 0.5).unwrap();
        assert_eq!(inst.action_set.to_bitstrings(), vec!["1100", "0011"]);
        assert_eq!(inst.mu, vec![0.25, 0.25, 0.0, 0.0]);
        assert_eq!(inst.gap_profile().gaps, vec![0.0, 0.5]);

        let err = make_disjoint_instance(3, 2, SymMatrix::identity(3), 1, 0.5).unwrap_err();
        assert!(err.to_string().contains("d/m"));
        assert!(make_disjoint_instance(4, 4, SymMatrix::identity(4), 1, 0.5).is_err());
        assert!(make_disjoint_instance(4, 2, SymMatrix::identity(4), 3, 0.5).is_err());
    }

    #[test]
    fn disjoint_actions_partition_items() {
        for (d, m) in [(4, 2), (6, 3), (6, 2), (8, 1), (9, 3)] {
            let inst = make_disjoint_instance(d, m, SymMatrix::identity(d), 1, 1.0).unwrap();
            let mut hits = vec![0; d];
            for a in inst.action_set.iter() {
                assert_eq!(a.len(), m);
                for &i in a {
                    hits[i] += 1;
                }
            }
            assert!(hits.iter().all(|&h| h == 1));
        }
    }

    #[test]
    fn lower_bound_gap_examples() {
        let v = lower_bound_gap(&[1.0, 1.0], 2, 4, 4).unwrap();
        assert!((v - 0.5 * 0.5f64.sqrt()).abs() < 1e-15);
        let v = lower_bound_gap(&[4.0, 4.0], 2, 4, 8).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for t in [1u64, 10, 100, 1000, 10_000] {
            let v = lower_bound_gap(&[1.0, 2.0, 3.0], 2, 6, t).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(lower_bound_gap(&[1.0, 0.0], 2, 4, 4).is_err());
        assert!(lower_bound_gap(&[1.0, 1.0], 2, 4, 0).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let inst = diag_instance(&[1.0, 1.0], &[0.0, 1.0]);
        let lb = lower_bound_value(&inst, 64).unwrap();
        assert!((lb.bound - 2f64.sqrt()).abs() < 1e-15);

        let inst = make_disjoint_instance(4, 2, SymMatrix::identity(4), 1, 0.1).unwrap();
        let lb = lower_bound_value(&inst, 100).unwrap();
        assert_eq!(lb.bound, 2.5);
        assert_eq!(lb.radicand, 4.0);

        let inst = make_disjoint_instance(4, 2, SymMatrix::zeros(4), 1, 0.1).unwrap();
        let lb = lower_bound_value(&inst, 100).unwrap();
        assert_eq!(lb.bound, 0.0);
        assert!(lb.degenerate);
        assert!(!lb.negative_radicand);

        assert!(lower_bound_value(&inst, 0).is_err());
    }

    #[test]
    fn negative_radicand_flagged() {
        // One block of two strongly anti-correlated items: 1 - 1 + tiny.
        let sigma = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let inst = Instance::new("anti", ActionSet::new(2, vec![vec![0, 1]]), vec![0.0; 2], sigma)
            .unwrap();
        assert_eq!(lower_bound_radicand(&inst), 0.0);
        let sigma = SymMatrix::from_rows(&[vec![1.0, -0.9], vec![-0.9, 1.0]]).unwrap();
        let mut inst = Instance::new("anti", ActionSet::new(2, vec![vec![0, 1]]), vec![0.0; 2], sigma)
            .unwrap();
        // Radicand cannot go negative for a PSD Σ*; force it through raw parts.
        inst.sigma = SymMatrix::from_rows(&[vec![0.1, -0.9], vec![-0.9, 0.1]]).unwrap();
        let lb = lower_bound_value(&inst, 10).unwrap();
        assert!(lb.negative_radicand);
        assert_eq!(lb.bound, 0.0);
    }

    #[test]
    fn random_generator_positive_bias_gives_nonnegative_covariance() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = RandomSpec { d: 6, p: 8, m_max: Some(3), corr_bias: 1.0, scale: 0.1 };
            let inst = gen_random_instance(&spec, &mut rng).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    assert!(inst.sigma.get(i, j) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn random_generator_negative_bias_pushes_correlations_down() {
        let mut neg_sum = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = RandomSpec { d: 6, p: 8, m_max: None, corr_bias: -1.0, scale: 1.0 };
            let inst = gen_random_instance(&spec, &mut rng).unwrap();
            for i in 0..6 {
                for j in (i + 1)..6 {
                    neg_sum += inst.sigma.get(i, j);
                }
            }
        }
        assert!(neg_sum < 0.0);
    }

    #[test]
    fn random_generator_is_deterministic() {
        let spec = RandomSpec { d: 6, p: 10, m_max: None, corr_bias: 0.0, scale: 1.0 };
        let a = gen_random_instance(&spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = gen_random_instance(&spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_generator_exhaustive_case() {
        let spec = RandomSpec { d: 3, p: 7, m_max: Some(3), corr_bias: 0.0, scale: 1.0 };
        let inst = gen_random_instance(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut bits = inst.action_set.to_bitstrings();
        bits.sort();
        assert_eq!(bits, vec!["001", "010", "011", "100", "101", "110", "111"]);

        let spec = RandomSpec { p: 8, ..spec };
        assert!(gen_random_instance(&spec, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn feasible_counts() {
        assert_eq!(feasible_action_count(3, 3), 7);
        assert_eq!(feasible_action_count(4, 2), 10);
        assert_eq!(feasible_action_count(10, 1), 10);
    }

    #[test]
    fn file_roundtrip_and_factor_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = RandomSpec { d: 5, p: 6, m_max: Some(3), corr_bias: 0.5, scale: 0.3 };
        let inst = gen_random_instance(&spec, &mut rng).unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);

        let mut file = inst.to_file();
        file.sigma[0] += 1e-3;
        assert!(Instance::from_file(file).is_err());
    }

    #[test]
    fn file_rejects_bad_bitstring() {
        let mut file = diag_instance(&[1.0, 1.0], &[0.0, 0.0]).to_file();
        file.actions[0] = "1x".into();
        assert!(matches!(Instance::from_file(file), Err(Error::Format(_))));
    }
}
