//! Instance-dependent regret-rate quantities.
//!
//! `S = Σ_i max_{a∋i} σ²_{a,i}` with `σ²_{a,i} = Σ_{j∈a} (Σ*_ij)₊` for
//! semi-bandit feedback, `Q = Σ_a aᵀΣ*a` for bandit feedback. Both are the
//! radicands of `√(T·…)` gap-free rates.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::instance::{feasible_action_count, gen_random_instance, lower_bound_radicand, Instance, RandomSpec};
use crate::seed::derive_seed;

/// `Σ_{j∈a} max(Σ*_ij, 0)`; `items` is the action's item list.
pub fn sigma_ai(instance: &Instance, items: &[usize], i: usize) -> Result<f64> {
    if !items.contains(&i) {
        return Err(invalid(format!("item {i} is not in the action")));
    }
    Ok(items.iter().map(|&j| instance.sigma.get(i, j).max(0.0)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFlags {
    /// `Q < S`: negative correlations help the bandit rate.
    pub bandit_below_semibandit: bool,
    pub negative_radicand: bool,
    /// No action has a positive gap, so the gap-dependent sum is empty.
    pub no_suboptimal_action: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub semibandit_gapfree: f64,
    pub bandit_gapfree: f64,
    /// `Σ_i max_{a∋i, Δ_a>0} σ²_{a,i}/Δ_a`, up to poly-log factors.
    pub semibandit_gapdep: f64,
    pub lower_bound_radicand: f64,
    /// `√S/√Q`; `None` when `Q ≤ 0`.
    pub ratio: Option<f64>,
    pub flags: RateFlags,
}

pub fn rate_report(instance: &Instance) -> RateReport {
    let d = instance.d();
    let gaps = instance.gap_profile().gaps;
    let mut s = 0.0;
    let mut gapdep = 0.0;
    let mut any_gap = false;
    for i in 0..d {
        let mut best = 0.0f64;
        let mut best_dep = 0.0f64;
        for (p, a) in instance.action_set.iter().enumerate() {
            if a.binary_search(&i).is_err() {
                continue;
            }
            let v: f64 = a.iter().map(|&j| instance.sigma.get(i, j).max(0.0)).sum();
            best = best.max(v);
            if gaps[p] > 0.0 {
                any_gap = true;
                best_dep = best_dep.max(v / gaps[p]);
            }
        }
        s += best;
        gapdep += best_dep;
    }
    let q: f64 = (0..instance.num_actions())
        .map(|p| instance.action_variance(p))
        .sum();
    let radicand = lower_bound_radicand(instance);
    RateReport {
        semibandit_gapfree: s,
        bandit_gapfree: q,
        semibandit_gapdep: gapdep,
        lower_bound_radicand: radicand,
        ratio: (q > 0.0).then(|| s.sqrt() / q.sqrt()),
        flags: RateFlags {
            bandit_below_semibandit: q < s,
            negative_radicand: radicand < 0.0,
            no_suboptimal_action: !any_gap,
        },
    }
}

/// Parameters of the semi-bandit/bandit ratio sweep over `P/d`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub d: usize,
    pub p_values: Vec<usize>,
    #[serde(default)]
    pub m_max: Option<usize>,
    #[serde(default)]
    pub corr_bias: f64,
    pub replicates: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Seed of the `rep`-th instance generated for `p` actions.
pub fn sweep_instance_seed(seed: u64, p: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(seed, p as u64), rep as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: usize,
    pub p_over_d: f64,
    pub mean_ratio: Option<f64>,
    pub std_ratio: Option<f64>,
    /// Instances with a defined ratio.
    pub replicates: usize,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().filter_map(|r| r.warning.as_deref())
    }

    /// Header `p_over_d,mean_ratio,std_ratio,replicates`; skipped values
    /// are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"p_over_d,mean_ratio,std_ratio,replicates\n")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.p_over_d, opt(r.mean_ratio), opt(r.std_ratio), r.replicates)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn check_p(spec: &SweepSpec, p: usize) -> Option<String> {
    let m_max = spec.m_max.unwrap_or(spec.d);
    let feasible = feasible_action_count(spec.d, m_max);
    if p == 0 || p as u128 > feasible {
        Some(format!("P={p} infeasible: {feasible} distinct actions with at most {m_max} of {} items", spec.d))
    } else if p.saturating_mul(m_max) < spec.d {
        Some(format!("P={p} infeasible: cannot cover {} items with actions of size {m_max}", spec.d))
    } else {
        None
    }
}

/// Generates `replicates` random instances per `P` and aggregates their
/// ratios. Infeasible `P` values produce a warning row.
pub fn ratio_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    if spec.d == 0 {
        return Err(invalid("d must be >= 1"));
    }
    if spec.replicates == 0 {
        return Err(invalid("replicates must be >= 1"));
    }
    let mut rows = Vec::with_capacity(spec.p_values.len());
    for &p in &spec.p_values {
        let p_over_d = p as f64 / spec.d as f64;
        if let Some(w) = check_p(spec, p) {
            rows.push(SweepRow { p, p_over_d, mean_ratio: None, std_ratio: None, replicates: 0, warning: Some(w) });
            continue;
        }
        let gen = RandomSpec {
            d: spec.d,
            p,
            m_max: spec.m_max,
            corr_bias: spec.corr_bias,
            scale: spec.scale,
        };
        let ratios: Vec<Option<f64>> = (0..spec.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(sweep_instance_seed(spec.seed, p, rep));
                gen_random_instance(&gen, &mut rng).map(|inst| rate_report(&inst).ratio)
            })
            .collect::<Result<_>>()?;
        let defined: Vec<f64> = ratios.into_iter().flatten().collect();
        let n = defined.len();
        let (mean, std) = if n == 0 {
            (None, None)
        } else {
            let m = defined.iter().sum::<f64>() / n as f64;
            let s = if n > 1 {
                (defined.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            (Some(m), Some(s))
        };
        let warning = (n < spec.replicates)
            .then(|| format!("P={p}: {} instance(s) with zero bandit rate skipped", spec.replicates - n));
        rows.push(SweepRow { p, p_over_d, mean_ratio: mean, std_ratio: std, replicates: n, warning });
    }
    Ok(SweepTable { rows })
}
