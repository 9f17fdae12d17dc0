//! Flag grammar for objectives: `l1`, `linf`, `topl:L`, `ord:w1,w2,...`,
//! and `sym:w1,w2|w3,w4` (max over `|`-separated ordered-norm weight lists).

use nestnorm_core::norms::Objective;

use crate::CliError;

pub fn parse_objective(s: &str) -> Result<Objective, CliError> {
    let bad = |why: String| CliError::BadFlag {
        flag: "objective",
        why,
    };
    let parse_weights = |body: &str| -> Result<Vec<f64>, CliError> {
        body.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("weight {t:?}: {e}")))
            })
            .collect()
    };
    match s.trim() {
        "l1" => Ok(Objective::L1),
        "linf" => Ok(Objective::LInf),
        rest => {
            let (head, body) = rest
                .split_once(':')
                .ok_or_else(|| bad(format!("unknown objective {rest:?}")))?;
            match head {
                "topl" => {
                    let ell = body
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| bad(format!("top-ℓ count {body:?}: {e}")))?;
                    Ok(Objective::TopL { ell })
                }
                "ord" => Ok(Objective::Ord {
                    w: parse_weights(body)?,
                }),
                "sym" => {
                    let ws = body
                        .split('|')
                        .map(|part| parse_weights(part))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(Objective::SymMaxOrd { ws })
                }
                _ => Err(bad(format!("unknown objective {head:?}"))),
            }
        }
    }
}

/// Canonical display form, mirrored back into result metadata and CSV rows.
pub fn objective_label(obj: &Objective) -> String {
    let join = |w: &[f64]| {
        w.iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    match obj {
        Objective::L1 => "l1".into(),
        Objective::LInf => "linf".into(),
        Objective::TopL { ell } => format!("topl:{ell}"),
        Objective::Ord { w } => format!("ord:{}", join(w)),
        Objective::SymMaxOrd { ws } => format!(
            "sym:{}",
            ws.iter().map(|w| join(w)).collect::<Vec<_>>().join("|")
        ),
    }
}
