use super::{dp_finite, DpError, McOptions, ProblemSpec, Solution};
use crate::json::mat_to_rows;
use nalgebra::DMatrix;
use serde::Serialize;

/// Seed-to-seed variation of one `(t, s)` entry.
///
/// Statistics are elementwise over the coefficient matrix `[[P, q], [q^T, r]]`
/// of `V` and over `[K k]` for the policy; the `max_*` fields are the
/// largest entry. `None` when some seed produced no value at this entry.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientSpread {
    pub t: usize,
    pub s: usize,
    pub v_max_range: Option<f64>,
    pub v_max_std: Option<f64>,
    pub policy_max_range: Option<f64>,
    pub policy_max_std: Option<f64>,
    pub v_std: Option<Vec<Vec<f64>>>,
    pub v_mean: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct McErrorReport {
    pub seeds: Vec<u64>,
    #[serde(rename = "N")]
    pub samples: usize,
    pub entries: Vec<CoefficientSpread>,
}

impl McErrorReport {
    pub fn entry(&self, t: usize, s: usize) -> Option<&CoefficientSpread> {
        self.entries.iter().find(|e| e.t == t && e.s == s)
    }

    /// Largest `v_max_std` over all entries.
    pub fn max_v_std(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|e| e.v_max_std)
            .fold(0.0, f64::max)
    }
}

struct Stats {
    mean: DMatrix<f64>,
    std: DMatrix<f64>,
    range: DMatrix<f64>,
}

fn stats(mats: &[DMatrix<f64>]) -> Stats {
    let (r, c) = mats[0].shape();
    let n = mats.len() as f64;
    let mut mean = DMatrix::zeros(r, c);
    for m in mats {
        mean += m;
    }
    mean /= n;
    let mut var = DMatrix::zeros(r, c);
    let mut lo = mats[0].clone();
    let mut hi = mats[0].clone();
    for m in mats {
        let d = m - &mean;
        var += d.component_mul(&d);
        lo = lo.zip_map(m, f64::min);
        hi = hi.zip_map(m, f64::max);
    }
    let std = (var / (n - 1.0)).map(f64::sqrt);
    Stats {
        mean,
        std,
        range: hi - lo,
    }
}

fn policy_matrix(sol: &Solution, t: usize, s: usize) -> Option<DMatrix<f64>> {
    let p = sol.policy(t, s)?;
    let (m, n) = p.gain().shape();
    let mut out = DMatrix::zeros(m, n + 1);
    out.columns_mut(0, n).copy_from(p.gain());
    out.column_mut(n).copy_from(p.offset());
    Some(out)
}

/// Solves once per seed and reports how much `V_t^s` and the policies move.
pub fn mc_error(
    spec: &ProblemSpec,
    opts: &McOptions,
    seeds: &[u64],
) -> Result<McErrorReport, DpError> {
    if seeds.len() < 2 {
        return Err(DpError::InvalidSpec("mc_error needs at least two seeds".into()));
    }
    let sols = seeds
        .iter()
        .map(|&seed| {
            let o = McOptions {
                seed,
                ..opts.clone()
            };
            dp_finite(spec, &o)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut entries = Vec::new();
    for t in 0..spec.horizon {
        for s in 0..spec.k {
            let vs: Option<Vec<_>> = sols
                .iter()
                .map(|sol| sol.value(t, s).map(|v| v.coefficients()))
                .collect();
            let ps: Option<Vec<_>> = sols.iter().map(|sol| policy_matrix(sol, t, s)).collect();
            let vstat = vs.as_deref().map(stats);
            let pstat = ps.as_deref().map(stats);
            entries.push(CoefficientSpread {
                t,
                s,
                v_max_range: vstat.as_ref().map(|x| x.range.max()),
                v_max_std: vstat.as_ref().map(|x| x.std.max()),
                policy_max_range: pstat.as_ref().map(|x| x.range.max()),
                policy_max_std: pstat.as_ref().map(|x| x.std.max()),
                v_std: vstat.as_ref().map(|x| mat_to_rows(&x.std)),
                v_mean: vstat.as_ref().map(|x| mat_to_rows(&x.mean)),
            });
        }
    }
    Ok(McErrorReport {
        seeds: seeds.to_vec(),
        samples: opts.samples,
        entries,
    })
}
