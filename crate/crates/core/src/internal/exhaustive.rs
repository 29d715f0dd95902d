use crate::error::{Error, Result};
use crate::occupancy::Occupancy;

use super::local::LocalProblem;
use super::{BackupContext, BackupResult};

/// Exact backup: enumerates every decentralized rule that differs on the
/// occupancy support and maximizes `phi + sawtooth(next, omega)`. Levels
/// outside the support, or below the transmission cost, stay idle. Ties keep
/// the lexicographically smallest rule.
pub fn exhaustive_backup(ctx: &BackupContext<'_>, eta: &Occupancy, size_limit: f64) -> Result<BackupResult> {
    let local = LocalProblem::new(*ctx, eta);
    let n = local.num_vars();
    let levels = local.levels;
    let size = (levels as f64).powi(n as i32);
    if size > size_limit {
        return Err(Error::SearchTooLarge {
            size,
            limit: size_limit,
        });
    }
    let mut dense = local.scratch();
    let mut x = vec![0usize; n];
    let mut best_value = f64::NEG_INFINITY;
    let mut best_x = x.clone();
    loop {
        let value = local.objective(&x, &mut dense);
        if value > best_value {
            best_value = value;
            best_x.copy_from_slice(&x);
        }
        let mut i = n;
        let done = loop {
            if i == 0 {
                break true;
            }
            i -= 1;
            x[i] += 1;
            if x[i] < levels {
                break false;
            }
            x[i] = 0;
        };
        if done {
            break;
        }
    }
    Ok(BackupResult {
        rule: local.rule(&best_x),
        value: best_value,
        bound: best_value,
    })
}
