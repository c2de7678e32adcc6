//! Cost-saving ratios of a run against the frame's arithmetic baseline.
//! Everything here works on position sequences, so reports can be
//! recomputed from the iteration tables alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Signed distance from the baseline's convergence case, in items.
    pub delta: i64,
    pub dacsr: f64,
    pub icsr: f64,
    pub lcsr: f64,
}

fn at(positions: &[u64], level: usize, what: &str) -> Result<u64> {
    level
        .checked_sub(1)
        .and_then(|i| positions.get(i))
        .copied()
        .ok_or_else(|| Error::InvalidParams(format!("{what} level {level} has no position")))
}

pub fn discrepancy(run_clevel_position: u64, baseline_clevel_position: u64) -> i64 {
    run_clevel_position as i64 - baseline_clevel_position as i64
}

/// Data acquisition saving: zero when the run stops more than `eta` items
/// before the baseline, otherwise the PLevel position over the run's
/// convergence position.
pub fn dacsr(plevel_position: u64, run_clevel_position: u64, delta: i64, eta: u64) -> f64 {
    if delta < -(eta as i64) {
        0.0
    } else {
        plevel_position as f64 / run_clevel_position as f64
    }
}

/// Induction saving: training cost of the baseline up to the PLevel over the
/// cost of the run up to its CLevel, both counted as summed positions.
pub fn icsr(
    baseline_positions: &[u64],
    run_positions: &[u64],
    plevel: usize,
    run_clevel: usize,
) -> Result<f64> {
    if plevel == 0 || run_clevel < plevel {
        return Err(Error::InvalidParams(format!(
            "CLevel {run_clevel} precedes PLevel {plevel}"
        )));
    }
    at(baseline_positions, plevel, "baseline PLevel")?;
    at(run_positions, run_clevel, "run CLevel")?;
    let shared: f64 = baseline_positions[..plevel - 1]
        .iter()
        .map(|&p| p as f64)
        .sum();
    let numerator = shared + baseline_positions[plevel - 1] as f64;
    let own: f64 = run_positions[plevel - 1..run_clevel]
        .iter()
        .map(|&p| p as f64)
        .sum();
    Ok(numerator / (shared + own))
}

pub fn evaluate(
    run_positions: &[u64],
    run_clevel: usize,
    baseline_positions: &[u64],
    baseline_clevel: usize,
    plevel: usize,
    eta: u64,
) -> Result<MetricsReport> {
    let run_cl = at(run_positions, run_clevel, "run CLevel")?;
    let base_cl = at(baseline_positions, baseline_clevel, "baseline CLevel")?;
    let p = at(baseline_positions, plevel, "baseline PLevel")?;
    let delta = discrepancy(run_cl, base_cl);
    let dacsr = dacsr(p, run_cl, delta, eta);
    let icsr = icsr(baseline_positions, run_positions, plevel, run_clevel)?;
    Ok(MetricsReport {
        delta,
        dacsr,
        icsr,
        lcsr: dacsr * icsr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arithmetic(levels: usize) -> Vec<u64> {
        (1..=levels as u64).map(|l| 5000 * l).collect()
    }

    #[test]
    fn baseline_row_of_a_published_frame() {
        // PLevel 18 at 90000, CLevel 46 at 230000
        let base = arithmetic(50);
        let m = evaluate(&base, 46, &base, 46, 18, 5000).unwrap();
        assert_eq!(m.delta, 0);
        assert!((m.dacsr - 0.3913).abs() < 5e-5);
        assert!((m.icsr - 171.0 / 1081.0).abs() < 1e-12);
        assert!((m.lcsr - 0.0619).abs() < 5e-5);
    }

    #[test]
    fn converging_at_plevel_saves_nothing() {
        let base = arithmetic(20);
        let m = evaluate(&base, 18, &base, 18, 18, 5000).unwrap();
        assert_eq!((m.dacsr, m.icsr, m.lcsr), (1.0, 1.0, 1.0));
    }

    #[test]
    fn early_stops_are_penalized() {
        let base = arithmetic(50);
        let mut run = arithmetic(18);
        run.extend([150_000, 200_000]);
        let m = evaluate(&run, 19, &base, 46, 18, 5000).unwrap();
        assert_eq!(m.delta, 150_000 - 230_000);
        assert_eq!((m.dacsr, m.lcsr), (0.0, 0.0));
        assert!(m.icsr > 0.0);

        // within the interval of tolerance
        let m = evaluate(&run, 20, &base, 41, 18, 5000).unwrap();
        assert_eq!(m.delta, -5000);
        assert_eq!(m.dacsr, 90_000.0 / 200_000.0);
    }

    #[test]
    fn icsr_counts_own_levels_from_plevel() {
        let base = arithmetic(10);
        let run = vec![5000, 10000, 15000, 40000];
        let expected = 30000.0 / (15000.0 + 15000.0 + 40000.0);
        assert!((icsr(&base, &run, 3, 4).unwrap() - expected).abs() < 1e-15);
        assert!(icsr(&base, &run, 3, 2).is_err());
        assert!(icsr(&base, &run, 3, 5).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn laws_hold(
                plevel in 1usize..30,
                run_extra in 0usize..40,
                base_extra in 0usize..40,
                steps in prop::collection::vec(1u64..50_000, 80),
                eta in 1u64..10_000,
            ) {
                let base: Vec<u64> = (1..=(plevel + base_extra) as u64).map(|l| eta * l).collect();
                let mut run: Vec<u64> = base[..plevel].to_vec();
                for s in steps.iter().take(run_extra) {
                    let last = *run.last().unwrap();
                    run.push(last + s);
                }
                let m = evaluate(&run, run.len(), &base, base.len(), plevel, eta).unwrap();
                prop_assert_eq!(m.lcsr, m.dacsr * m.icsr);
                prop_assert!(m.icsr > 0.0 && m.icsr <= 1.0 + 1e-12);
                if m.delta < -(eta as i64) {
                    prop_assert_eq!(m.dacsr, 0.0);
                } else {
                    prop_assert!(m.dacsr > 0.0 && m.dacsr <= 1.0);
                }
                if run_extra == 0 && base_extra == 0 {
                    prop_assert_eq!((m.dacsr, m.icsr), (1.0, 1.0));
                }
            }
        }
    }
}
